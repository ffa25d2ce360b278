//! On-disk formats.
//!
//! * data trace: CSV with header `ts,group,<params...>[,label]`, labels `+1`/`-1`
//! * event trace: one symbol per line, blank lines ignored
//! * profile, curve model and classifier model: JSON objects stamped with
//!   the master seed and configuration hash

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use icn_sentinel_core::classifiers::Classifier;
use icn_sentinel_core::data::{DataRow, DataTrace, EventTrace, Group, Label};
use icn_sentinel_core::iac::{CurveBand, EventModel, IacModel};
use icn_sentinel_core::profiler::{compute_threshold, ParameterSpec, ThresholdProfile};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::{Error, Result};
use icn_sentinel_core::Error as CoreError;

type CoreResult<T> = icn_sentinel_core::Result<T>;

/// Provenance embedded in every JSON artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stamp {
    pub seed: u64,
    pub config_hash: String,
}

const PROFILE_KEYS: [&str; 4] = ["trim_fraction", "window_len", "seed", "config_hash"];
const IAC_KEYS: [&str; 7] = ["w_delta", "confidence", "alpha", "sigma_th", "alphabet", "seed", "config_hash"];

fn parse_err(row: usize, message: String) -> CoreError {
    CoreError::Parse { row, message }
}

/// Reads a data trace. With an empty `schema` every column between `group`
/// and an optional trailing `label` is a parameter; otherwise the header must
/// name each schema parameter and other columns are ignored. Row numbers in
/// errors count data rows from 1.
pub fn read_data_trace<R: Read>(reader: R, schema: &[String]) -> CoreResult<DataTrace> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = csv
        .headers()
        .map_err(|e| CoreError::Schema(format!("unreadable header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.len() < 2 || header[0] != "ts" || header[1] != "group" {
        return Err(CoreError::Schema("header must start with `ts,group`".into()));
    }
    let label_col = (header.last().map(String::as_str) == Some("label")).then(|| header.len() - 1);
    let params_end = label_col.unwrap_or(header.len());
    let schema: Vec<String> = if schema.is_empty() {
        header[2..params_end].to_vec()
    } else {
        schema.to_vec()
    };
    let mut columns = Vec::with_capacity(schema.len());
    for name in &schema {
        let idx = header[2..params_end]
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CoreError::Schema(format!("missing column `{name}`")))?;
        columns.push(idx + 2);
    }

    let mut rows = Vec::new();
    for (i, record) in csv.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| parse_err(row, e.to_string()))?;
        if record.len() != header.len() {
            return Err(parse_err(row, format!("expected {} fields, got {}", header.len(), record.len())));
        }
        let ts: i64 = record[0]
            .parse()
            .map_err(|_| parse_err(row, format!("invalid timestamp `{}`", &record[0])))?;
        let group = match &record[1] {
            "" => Group::from_timestamp(ts),
            tag => tag.parse()?,
        };
        let mut values = BTreeMap::new();
        for (name, &c) in schema.iter().zip(&columns) {
            let v: f64 = record[c]
                .parse()
                .map_err(|_| parse_err(row, format!("column `{name}`: invalid number `{}`", &record[c])))?;
            values.insert(name.clone(), v);
        }
        let label = match label_col.map(|c| &record[c]) {
            None | Some("") => None,
            Some(cell) => Some(cell.parse::<Label>().map_err(|e| parse_err(row, e.to_string()))?),
        };
        rows.push(DataRow { timestamp: ts, group, values, label });
    }
    DataTrace::new(schema, rows)
}

pub fn parse_data_trace(path: &Path, schema: &[String]) -> Result<DataTrace> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_data_trace(BufReader::new(file), schema).map_err(|source| Error::Data { path: path.into(), source })
}

/// Writes a data trace; the label column is present when any row is labeled.
pub fn write_data_trace<W: Write>(writer: W, trace: &DataTrace) -> std::io::Result<()> {
    let labeled = trace.rows().iter().any(|r| r.label.is_some());
    let mut csv = csv::Writer::from_writer(writer);
    let mut header = vec!["ts".to_string(), "group".to_string()];
    header.extend(trace.schema().iter().cloned());
    if labeled {
        header.push("label".into());
    }
    csv.write_record(&header)?;
    for row in trace.rows() {
        let mut record = vec![row.timestamp.to_string(), row.group.to_string()];
        for name in trace.schema() {
            record.push(row.values[name].to_string());
        }
        if labeled {
            record.push(row.label.map(|l| l.to_string()).unwrap_or_default());
        }
        csv.write_record(&record)?;
    }
    csv.flush()
}

pub fn save_data_trace(path: &Path, trace: &DataTrace) -> Result<()> {
    let mut buf = Vec::new();
    write_data_trace(&mut buf, trace).map_err(|e| Error::io(path, e))?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Symbols of an event file, one per non-blank line.
pub fn read_events<R: BufRead>(reader: R) -> std::io::Result<Vec<String>> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let symbol = line.trim();
        if !symbol.is_empty() {
            out.push(symbol.to_string());
        }
    }
    Ok(out)
}

/// Reads an event trace; with an `alphabet` every symbol must belong to it.
pub fn parse_event_trace(path: &Path, alphabet: Option<&BTreeSet<String>>) -> Result<EventTrace> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let events = read_events(BufReader::new(file)).map_err(|e| Error::io(path, e))?;
    match alphabet {
        Some(a) => EventTrace::with_alphabet(events, a.clone()).map_err(|source| Error::Data { path: path.into(), source }),
        None => Ok(EventTrace::new(events)),
    }
}

pub fn write_events<W: Write>(mut writer: W, trace: &EventTrace) -> std::io::Result<()> {
    for e in trace.events() {
        writeln!(writer, "{e}")?;
    }
    writer.flush()
}

pub fn save_events(path: &Path, trace: &EventTrace) -> Result<()> {
    let mut buf = Vec::new();
    write_events(&mut buf, trace).map_err(|e| Error::io(path, e))?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

fn stamp_into(map: &mut Map<String, Value>, stamp: &Stamp) {
    map.insert("seed".into(), json!(stamp.seed));
    map.insert("config_hash".into(), json!(stamp.config_hash));
}

fn reserved_clash(names: impl IntoIterator<Item = impl AsRef<str>>, reserved: &[&str]) -> Option<String> {
    names.into_iter().map(|n| n.as_ref().to_string()).find(|n| reserved.contains(&n.as_str()))
}

pub fn profile_to_json(profile: &ThresholdProfile, stamp: &Stamp) -> CoreResult<Value> {
    if let Some(bad) = reserved_clash(profile.params.iter().map(|p| &p.name), &PROFILE_KEYS) {
        return Err(CoreError::Schema(format!("parameter name `{bad}` is reserved in profile files")));
    }
    let mut map = Map::new();
    for p in &profile.params {
        map.insert(p.name.clone(), json!({ "psi": p.psi, "mu": p.mu, "delta": p.delta, "p_th": p.p_th }));
    }
    map.insert("trim_fraction".into(), json!(profile.trim_fraction));
    map.insert("window_len".into(), json!(profile.window_len));
    stamp_into(&mut map, stamp);
    Ok(Value::Object(map))
}

fn number(v: &Value, what: &str) -> CoreResult<f64> {
    v.as_f64().ok_or_else(|| CoreError::Schema(format!("`{what}` must be a number")))
}

fn field<'a>(map: &'a Map<String, Value>, key: &str, ctx: &str) -> CoreResult<&'a Value> {
    map.get(key).ok_or_else(|| CoreError::Schema(format!("{ctx}: missing `{key}`")))
}

/// Parses a profile. Parameters keep file order unless `schema` is given,
/// in which case they follow it and must all be present.
pub fn profile_from_json(value: &Value, schema: &[String]) -> CoreResult<ThresholdProfile> {
    let map = value.as_object().ok_or_else(|| CoreError::Schema("profile must be a JSON object".into()))?;
    let mut params = Vec::new();
    for (name, spec) in map.iter().filter(|(k, _)| !PROFILE_KEYS.contains(&k.as_str())) {
        let obj = spec
            .as_object()
            .ok_or_else(|| CoreError::Schema(format!("parameter `{name}` must be an object")))?;
        let get = |k: &str| -> CoreResult<f64> { number(field(obj, k, name)?, k) };
        let (psi, mu, delta, p_th) = (get("psi")?, get("mu")?, get("delta")?, get("p_th")?);
        let (d, t) = compute_threshold(psi, mu)?;
        if (d - delta).abs() > 1e-9 * d.abs().max(1.0) || (t - p_th).abs() > 1e-9 * t.abs().max(1.0) {
            return Err(CoreError::Schema(format!("parameter `{name}`: delta/p_th disagree with psi and mu")));
        }
        params.push(ParameterSpec { name: name.clone(), psi, mu, delta, p_th });
    }
    if !schema.is_empty() {
        let mut ordered = Vec::with_capacity(schema.len());
        for name in schema {
            let at = params
                .iter()
                .position(|p| &p.name == name)
                .ok_or_else(|| CoreError::Schema(format!("profile has no parameter `{name}`")))?;
            ordered.push(params[at].clone());
        }
        params = ordered;
    }
    let trim_fraction = number(field(map, "trim_fraction", "profile")?, "trim_fraction")?;
    let window_len = field(map, "window_len", "profile")?
        .as_u64()
        .ok_or_else(|| CoreError::Schema("`window_len` must be a positive integer".into()))? as usize;
    Ok(ThresholdProfile { params, trim_fraction, window_len })
}

/// A curve model with the test settings it is used with.
#[derive(Debug, Clone, PartialEq)]
pub struct IacFile {
    pub model: IacModel,
    pub alpha: f64,
    pub sigma_th: f64,
}

pub fn iac_to_json(file: &IacFile, stamp: &Stamp) -> CoreResult<Value> {
    let model = &file.model;
    if let Some(bad) = reserved_clash(&model.feature_events, &IAC_KEYS) {
        return Err(CoreError::Schema(format!("event name `{bad}` is reserved in curve model files")));
    }
    let mut map = Map::new();
    for e in &model.feature_events {
        let em = model
            .events
            .get(e)
            .ok_or_else(|| CoreError::Schema(format!("feature event `{e}` has no curves")))?;
        let mut curves = Map::new();
        for w in 0..em.min.len().min(em.max.len()) {
            curves.insert(
                (w + 1).to_string(),
                json!([em.min.mean[w], em.min.lower[w], em.min.upper[w], em.max.mean[w], em.max.lower[w], em.max.upper[w]]),
            );
        }
        map.insert(e.clone(), Value::Object(curves));
    }
    map.insert("w_delta".into(), json!(model.w_delta));
    map.insert("confidence".into(), json!(model.confidence));
    map.insert("alpha".into(), json!(file.alpha));
    map.insert("sigma_th".into(), json!(file.sigma_th));
    map.insert("alphabet".into(), json!(model.alphabet));
    stamp_into(&mut map, stamp);
    Ok(Value::Object(map))
}

pub fn iac_from_json(value: &Value) -> CoreResult<IacFile> {
    let map = value.as_object().ok_or_else(|| CoreError::Schema("curve model must be a JSON object".into()))?;
    let mut events = BTreeMap::new();
    let mut feature_events = Vec::new();
    for (e, curves) in map.iter().filter(|(k, _)| !IAC_KEYS.contains(&k.as_str())) {
        let curves = curves
            .as_object()
            .ok_or_else(|| CoreError::Schema(format!("event `{e}` must map window sizes to curves")))?;
        let mut by_w = BTreeMap::new();
        for (w, vals) in curves {
            let w: usize = w
                .parse()
                .map_err(|_| CoreError::Schema(format!("event `{e}`: window size `{w}` is not an integer")))?;
            let vals = vals
                .as_array()
                .filter(|a| a.len() == 6)
                .ok_or_else(|| CoreError::Schema(format!("event `{e}`, w={w}: expected 6 numbers")))?;
            let nums = vals.iter().map(|v| number(v, "curve value")).collect::<CoreResult<Vec<_>>>()?;
            by_w.insert(w, nums);
        }
        if by_w.keys().copied().ne(1..=by_w.len()) {
            return Err(CoreError::Schema(format!("event `{e}`: window sizes must run 1..n")));
        }
        let band = |off: usize| CurveBand {
            mean: by_w.values().map(|v| v[off]).collect(),
            lower: by_w.values().map(|v| v[off + 1]).collect(),
            upper: by_w.values().map(|v| v[off + 2]).collect(),
        };
        events.insert(e.clone(), EventModel { min: band(0), max: band(3) });
        feature_events.push(e.clone());
    }
    let alphabet: BTreeSet<String> = serde_json::from_value(field(map, "alphabet", "curve model")?.clone())
        .map_err(|e| CoreError::Schema(format!("`alphabet`: {e}")))?;
    let w_delta = field(map, "w_delta", "curve model")?
        .as_u64()
        .ok_or_else(|| CoreError::Schema("`w_delta` must be a positive integer".into()))? as usize;
    let model = IacModel {
        events,
        feature_events,
        alphabet,
        confidence: number(field(map, "confidence", "curve model")?, "confidence")?,
        w_delta,
    };
    Ok(IacFile {
        model,
        alpha: number(field(map, "alpha", "curve model")?, "alpha")?,
        sigma_th: number(field(map, "sigma_th", "curve model")?, "sigma_th")?,
    })
}

/// A trained classifier with the feature names it consumes, in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(flatten)]
    pub classifier: Classifier,
    pub features: Vec<String>,
    pub seed: u64,
    pub config_hash: String,
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

pub fn save_profile(path: &Path, profile: &ThresholdProfile, stamp: &Stamp) -> Result<()> {
    let value = profile_to_json(profile, stamp).map_err(|source| Error::Data { path: path.into(), source })?;
    write_json(path, &value)
}

pub fn load_profile(path: &Path, schema: &[String]) -> Result<ThresholdProfile> {
    let value: Value = read_json(path)?;
    profile_from_json(&value, schema).map_err(|source| Error::Data { path: path.into(), source })
}

pub fn save_iac(path: &Path, file: &IacFile, stamp: &Stamp) -> Result<()> {
    let value = iac_to_json(file, stamp).map_err(|source| Error::Data { path: path.into(), source })?;
    write_json(path, &value)
}

pub fn load_iac(path: &Path) -> Result<IacFile> {
    let value: Value = read_json(path)?;
    iac_from_json(&value).map_err(|source| Error::Data { path: path.into(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parses_a_table_row() {
        let text = "ts,group,FGF,MSV,GBV,EGT,Power\n0,MD,329,10.51,1.43,469,918\n";
        let t = read_data_trace(text.as_bytes(), &schema(&["FGF", "MSV", "GBV", "EGT", "Power"])).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.rows()[0].value("FGF").unwrap(), 329.0);
        assert_eq!(t.rows()[0].group, Group::MD);
        assert_eq!(t.rows()[0].label, None);
    }

    #[test]
    fn header_only_is_empty() {
        let t = read_data_trace("ts,group,FGF\n".as_bytes(), &schema(&["FGF"])).unwrap();
        assert!(t.is_empty());
    }

    #[test]
    fn bad_cell_reports_row() {
        let text = "ts,group,FGF,MSV\n0,MD,abc,1\n";
        let err = read_data_trace(text.as_bytes(), &schema(&["FGF", "MSV"])).unwrap_err();
        assert!(matches!(err, CoreError::Parse { row: 1, .. }), "{err:?}");
        let text = "ts,group,FGF\n0,MD,1\n60,MD,2\n120,MD,\n";
        let err = read_data_trace(text.as_bytes(), &schema(&["FGF"])).unwrap_err();
        assert!(matches!(err, CoreError::Parse { row: 3, .. }), "{err:?}");
    }

    #[test]
    fn missing_column_is_named() {
        let err = read_data_trace("ts,group,FGF\n".as_bytes(), &schema(&["FGF", "EGT"])).unwrap_err();
        assert_eq!(err, CoreError::Schema("missing column `EGT`".into()));
    }

    #[test]
    fn group_tags_and_labels() {
        let text = "ts,group,x,label\n0,ZZ,1,+1\n";
        assert_eq!(read_data_trace(text.as_bytes(), &[]).unwrap_err(), CoreError::UnknownGroup("ZZ".into()));
        let text = "ts,group,x,label\n46800,,1,-1\n3600,ND,2,1\n";
        let t = read_data_trace(text.as_bytes(), &[]).unwrap();
        assert_eq!(t.schema(), ["x".to_string()]);
        assert_eq!(t.rows()[0].group, Group::AD);
        assert_eq!(t.rows()[0].label, Some(Label::Anomalous));
        assert_eq!(t.rows()[1].label, Some(Label::Normal));
        assert!(read_data_trace("ts,group,x,label\n0,MD,1,0\n".as_bytes(), &[]).is_err());
    }

    #[test]
    fn header_must_lead_with_ts_and_group() {
        assert!(read_data_trace("group,ts,x\n".as_bytes(), &[]).is_err());
    }

    #[test]
    fn events_skip_blank_lines() {
        let ev = read_events("B\n\nA\n  \nB\n".as_bytes()).unwrap();
        assert_eq!(ev, vec!["B", "A", "B"]);
    }

    #[test]
    fn iac_rejects_gaps() {
        let v = json!({
            "B": { "1": [1, 1, 1, 1, 1, 1], "3": [1, 1, 1, 1, 1, 1] },
            "w_delta": 3, "confidence": 0.95, "alpha": 0.05, "sigma_th": 0.05, "alphabet": ["B"]
        });
        assert!(iac_from_json(&v).is_err());
    }

    #[test]
    fn profile_rejects_inconsistent_threshold() {
        let v = json!({
            "FGF": { "psi": 500.0, "mu": 334.17, "delta": 0.33166, "p_th": 400.0 },
            "trim_fraction": 0.1, "window_len": 1440
        });
        assert!(profile_from_json(&v, &[]).is_err());
    }
}
