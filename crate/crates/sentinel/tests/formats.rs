use std::collections::BTreeMap;

use icn_sentinel::commands::{load_campaign, write_campaign};
use icn_sentinel::config::RunConfig;
use icn_sentinel::formats::*;
use icn_sentinel_core::classifiers::{train, ClassifierKind, ClassifierParams, LabeledSet};
use icn_sentinel_core::data::{DataRow, DataTrace, Group, Label};
use icn_sentinel_core::harness::train_event_model;
use icn_sentinel_core::profiler::{ParameterSpec, ThresholdProfile};
use icn_sentinel_core::synth::gen_campaign;
use proptest::prelude::*;

fn stamp() -> Stamp {
    Stamp { seed: 7, config_hash: "ab".repeat(32) }
}

#[test]
fn table_row_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("row.csv");
    std::fs::write(&path, "ts,group,FGF,MSV,GBV,EGT,Power\n0,MD,329,10.51,1.43,469,918\n").unwrap();
    let names: Vec<String> = ["FGF", "MSV", "GBV", "EGT", "Power"].iter().map(|s| s.to_string()).collect();
    let t = parse_data_trace(&path, &names).unwrap();
    assert_eq!(t.len(), 1);
    assert_eq!(t.rows()[0].value("FGF").unwrap(), 329.0);
    assert_eq!(t.rows()[0].value("GBV").unwrap(), 1.43);

    std::fs::write(&path, "ts,group,FGF\n0,MD,abc\n").unwrap();
    let err = parse_data_trace(&path, &names[..1]).unwrap_err();
    assert!(err.to_string().contains("row 1"), "{err}");
    assert_eq!(err.exit_code(), 3);
    assert!(parse_data_trace(&dir.path().join("absent.csv"), &names).is_err());
}

fn trace_from(values: &[(i64, Vec<f64>, Option<Label>)]) -> DataTrace {
    let schema: Vec<String> = (0..values[0].1.len()).map(|i| format!("p{i}")).collect();
    let rows = values
        .iter()
        .map(|(ts, v, label)| DataRow {
            timestamp: *ts,
            group: Group::from_timestamp(*ts),
            values: schema.iter().cloned().zip(v.iter().copied()).collect::<BTreeMap<_, _>>(),
            label: *label,
        })
        .collect();
    DataTrace::new(schema, rows).unwrap()
}

// decimals with at most six fractional digits
fn decimal() -> impl Strategy<Value = f64> {
    (-1_000_000_000i64..1_000_000_000, 0u32..=6).prop_map(|(m, d)| format!("{}e-{d}", m).parse().unwrap())
}

proptest! {
    #[test]
    fn data_trace_round_trips(
        rows in prop::collection::vec((0i64..10_000_000, prop::collection::vec(decimal(), 3), prop::option::of(any::<bool>())), 1..40)
    ) {
        let rows: Vec<_> = rows
            .into_iter()
            .map(|(ts, v, l)| (ts, v, l.map(|b| if b { Label::Normal } else { Label::Anomalous })))
            .collect();
        let trace = trace_from(&rows);
        let mut buf = Vec::new();
        write_data_trace(&mut buf, &trace).unwrap();
        let back = read_data_trace(buf.as_slice(), &[]).unwrap();
        prop_assert_eq!(back, trace);
    }

    #[test]
    fn profile_round_trips(specs in prop::collection::vec((1u32..1_000_000, 1u32..1_000_000), 1..10)) {
        let params = specs
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| {
                let (psi, mu) = (f64::from(a.max(b)) / 1e3, f64::from(a.min(b)) / 1e3);
                ParameterSpec::new(format!("p{i}"), psi, mu).unwrap()
            })
            .collect();
        let profile = ThresholdProfile { params, trim_fraction: 0.1, window_len: 1440 };
        let json = profile_to_json(&profile, &stamp()).unwrap();
        let text = serde_json::to_string(&json).unwrap();
        let back = profile_from_json(&serde_json::from_str(&text).unwrap(), &[]).unwrap();
        prop_assert_eq!(back, profile);
    }
}

#[test]
fn profile_follows_schema_order() {
    let profile = ThresholdProfile {
        params: vec![ParameterSpec::new("b", 10.0, 5.0).unwrap(), ParameterSpec::new("a", 10.0, 4.0).unwrap()],
        trim_fraction: 0.1,
        window_len: 60,
    };
    let json = profile_to_json(&profile, &stamp()).unwrap();
    assert_eq!(json["seed"], 7);
    let back = profile_from_json(&json, &["a".to_string(), "b".to_string()]).unwrap();
    assert_eq!(back.names(), ["a", "b"]);
    assert!(profile_from_json(&json, &["c".to_string()]).is_err());
    let reserved = ThresholdProfile { params: vec![ParameterSpec::new("seed", 10.0, 5.0).unwrap()], ..profile };
    assert!(profile_to_json(&reserved, &stamp()).is_err());
}

#[test]
fn campaign_round_trips_through_files() {
    let config = RunConfig::default().resolve(Some(11)).unwrap();
    let campaign = gen_campaign(&config.gen).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_campaign(&config, &campaign, dir.path()).unwrap();
    let (stored, loaded) = load_campaign(dir.path()).unwrap();
    assert_eq!(stored, config);
    assert_eq!(loaded, campaign);

    // the curve model of a group survives serialization too
    let gc = &campaign.groups[&Group::MD];
    let model = train_event_model(&gc.normal_train, 100.0, 25, 0.95).unwrap();
    let file = IacFile { model, alpha: 0.05, sigma_th: 0.05 };
    let json = iac_to_json(&file, &stamp()).unwrap();
    assert_eq!(json["w_delta"], 25);
    let back = iac_from_json(&serde_json::from_str(&serde_json::to_string(&json).unwrap()).unwrap()).unwrap();
    assert_eq!(back, file);
}

#[test]
fn tampered_campaign_is_rejected() {
    let config = RunConfig::default().resolve(None).unwrap();
    let campaign = gen_campaign(&config.gen).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_campaign(&config, &campaign, dir.path()).unwrap();
    let path = dir.path().join("AD_S60_test.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, text.replacen(",AD,", ",ND,", 1)).unwrap();
    let err = load_campaign(dir.path()).unwrap_err();
    assert!(err.to_string().contains("manifest"), "{err}");
}

#[test]
fn model_files_round_trip() {
    let x = vec![vec![0.0, 1.0], vec![0.2, 0.9], vec![5.0, 4.0], vec![5.5, 4.2]];
    let y = vec![Label::Normal, Label::Normal, Label::Anomalous, Label::Anomalous];
    let data = LabeledSet::new(x, y).unwrap();
    for kind in ClassifierKind::ALL {
        let classifier = train(kind, &data, &ClassifierParams::default()).unwrap();
        let file = ModelFile { classifier, features: vec!["a".into(), "b".into()], seed: 3, config_hash: "h".into() };
        let text = serde_json::to_string(&file).unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["algo"], kind.as_str());
        assert!(value["standardization"].is_object());
        let back: ModelFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back, file);
    }
}
