use std::collections::BTreeMap;

use icn_sentinel_core::classifiers::c45::c45_train;
use icn_sentinel_core::classifiers::knn::{knn_train, Metric};
use icn_sentinel_core::classifiers::{Classify, LabeledSet};
use icn_sentinel_core::data::{train_test_split, DataRow, DataTrace, EventTrace, Group, Label, SensitivityDegree};
use icn_sentinel_core::harness::{label_ground_truth, metrics};
use icn_sentinel_core::iac::min_max_curves;
use icn_sentinel_core::profiler::{compute_threshold, count_compromised, invert_threshold, trim_mean, ParameterSpec, ThresholdProfile};
use icn_sentinel_core::stats::mann_whitney_u;
use proptest::prelude::*;

fn trace_of(values: &[f64]) -> DataTrace {
    let rows = values
        .iter()
        .enumerate()
        .map(|(i, &v)| DataRow {
            timestamp: i as i64 * 60,
            group: Group::MD,
            values: [("x".to_string(), v)].into_iter().collect(),
            label: None,
        })
        .collect();
    DataTrace::new(vec!["x".into()], rows).unwrap()
}

fn naive_curves(events: &[u8], e: u8, w_delta: usize) -> Option<(Vec<u32>, Vec<u32>)> {
    if !events.contains(&e) {
        return None;
    }
    let (mut lo, mut hi) = (Vec::new(), Vec::new());
    for w in 1..=w_delta {
        let counts: Vec<u32> = (0..events.len())
            .filter(|&i| events[i] == e && i + w <= events.len())
            .map(|i| events[i..i + w].iter().filter(|&&x| x == e).count() as u32)
            .collect();
        if counts.is_empty() {
            break;
        }
        lo.push(*counts.iter().min().unwrap());
        hi.push(*counts.iter().max().unwrap());
    }
    Some((lo, hi))
}

fn profile(specs: &[(f64, f64)]) -> ThresholdProfile {
    let params = specs
        .iter()
        .enumerate()
        .map(|(i, &(psi, mu))| ParameterSpec::new(format!("p{i}"), psi, mu).unwrap())
        .collect();
    ThresholdProfile { params, trim_fraction: 0.1, window_len: 1440 }
}

fn row_with(values: &[f64]) -> DataRow {
    DataRow {
        timestamp: 0,
        group: Group::MD,
        values: values.iter().enumerate().map(|(i, &v)| (format!("p{i}"), v)).collect::<BTreeMap<_, _>>(),
        label: None,
    }
}

proptest! {
    #[test]
    fn split_partitions_rows(n in 1usize..300, fraction in 0.01f64..0.99, seed: u64) {
        let values: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let (train, test) = train_test_split(&trace_of(&values), fraction, seed).unwrap();
        prop_assert_eq!(train.len(), (fraction * n as f64).round() as usize);
        let mut all: Vec<f64> = train.column("x").unwrap();
        all.extend(test.column("x").unwrap());
        all.sort_by(f64::total_cmp);
        prop_assert_eq!(all, values);
    }

    #[test]
    fn trim_mean_bounded_and_order_free(
        mut values in prop::collection::vec(-1e6f64..1e6, 1..200),
        trim in 0.0f64..0.49,
        shift in -1e3f64..1e3,
    ) {
        let m = trim_mean(&values, trim).unwrap();
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(m >= lo - 1e-6 && m <= hi + 1e-6);
        let shifted: Vec<f64> = values.iter().map(|v| v + shift).collect();
        prop_assert!((trim_mean(&shifted, trim).unwrap() - (m + shift)).abs() < 1e-6);
        values.reverse();
        prop_assert!((trim_mean(&values, trim).unwrap() - m).abs() < 1e-6);
    }

    #[test]
    fn trimmed_outliers_do_not_move_the_mean(core in prop::collection::vec(0f64..100.0, 18..40), spike in 1e6f64..1e9) {
        // one spike per end is always cut at 10% when n >= 10
        let mut values = core.clone();
        values.push(spike);
        values.push(-spike);
        let mut reference = core.clone();
        reference.push(100.0);
        reference.push(0.0);
        let a = trim_mean(&values, 0.1).unwrap();
        let b = trim_mean(&reference, 0.1).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn threshold_between_mean_and_limit(psi in 1e-3f64..1e5, ratio in 0.01f64..0.99) {
        let mu = psi * ratio;
        let (delta, p_th) = compute_threshold(psi, mu).unwrap();
        prop_assert!((delta - (psi - mu) / psi).abs() < 1e-12);
        prop_assert!(p_th > mu && p_th < psi);
        prop_assert!((invert_threshold(psi, p_th).unwrap() - mu).abs() <= 1e-9 * psi);
    }

    #[test]
    fn compromised_count_is_monotone(
        specs in prop::collection::vec((10f64..1e3, 0.1f64..0.9), 1..8),
        fractions in prop::collection::vec(0f64..1.2, 8),
        bump in prop::collection::vec(0f64..500.0, 8),
    ) {
        let specs: Vec<(f64, f64)> = specs.into_iter().map(|(psi, r)| (psi, psi * r)).collect();
        let p = profile(&specs);
        let names = p.names();
        let base: Vec<f64> = specs.iter().zip(&fractions).map(|(s, f)| s.0 * f).collect();
        let raised: Vec<f64> = base.iter().zip(&bump).map(|(v, b)| v + b).collect();
        let c0 = count_compromised(&row_with(&base), &p, &names).unwrap();
        let c1 = count_compromised(&row_with(&raised), &p, &names).unwrap();
        prop_assert!(c0 <= c1 && c1 <= names.len());
    }

    #[test]
    fn labels_nest_across_sensitivities(
        specs in prop::collection::vec((10f64..1e3, 0.1f64..0.9), 3..8),
        fractions in prop::collection::vec(0f64..1.0, 8),
    ) {
        let specs: Vec<(f64, f64)> = specs.into_iter().map(|(psi, r)| (psi, psi * r)).collect();
        let p = profile(&specs);
        let names = p.names();
        let values: Vec<f64> = specs.iter().zip(&fractions).map(|(s, f)| s.0 * f).collect();
        let row = row_with(&values);
        let at = |s| label_ground_truth(&row, &p, &names, s).unwrap().is_anomalous();
        let (least, medium, high) = (at(SensitivityDegree::Least), at(SensitivityDegree::Medium), at(SensitivityDegree::High));
        prop_assert!(!least || medium);
        prop_assert!(!medium || high);
    }

    #[test]
    fn metric_identity(tp in 0usize..200, fp in 0usize..200, tn in 0usize..200, fn_ in 0usize..200) {
        prop_assume!(tp + fn_ > 0 && fp + tn > 0);
        let m = metrics(tp, fp, tn, fn_).unwrap();
        let (pos, neg) = ((tp + fn_) as f64, (fp + tn) as f64);
        prop_assert!((m.sa * (pos + neg) - (m.adr * pos + (100.0 - m.fpr) * neg)).abs() < 1e-8);
        for v in [m.adr, m.fpr, m.sa] {
            prop_assert!((0.0..=100.0).contains(&v));
        }
    }

    #[test]
    fn mann_whitney_u_sums(
        a in prop::collection::vec(0u8..20, 1..40),
        b in prop::collection::vec(0u8..20, 1..40),
    ) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        let r = mann_whitney_u(&a, &b);
        prop_assert!((r.u_a + r.u_b - (a.len() * b.len()) as f64).abs() < 1e-9);
        prop_assert!(r.p > 0.0 && r.p <= 1.0);
        let s = mann_whitney_u(&b, &a);
        prop_assert!((s.p - r.p).abs() < 1e-9);
    }

    #[test]
    fn curves_match_enumeration(events in prop::collection::vec(0u8..4, 1..60), w_delta in 1usize..30, e in 0u8..4) {
        let trace = EventTrace::new(events.iter().map(|x| ((b'A' + x) as char).to_string()));
        let symbol = ((b'A' + e) as char).to_string();
        match (min_max_curves(&trace, &symbol, w_delta), naive_curves(&events, e, w_delta)) {
            (Ok((lo, hi)), Some((nlo, nhi))) => {
                prop_assert_eq!(lo.values, nlo);
                prop_assert_eq!(hi.values.clone(), nhi);
                prop_assert!(hi.values.iter().enumerate().all(|(i, &c)| c as usize <= i + 1));
            }
            (Err(_), None) => {}
            (got, want) => prop_assert!(false, "mismatch: {:?} vs {:?}", got.is_ok(), want.is_some()),
        }
    }

    #[test]
    fn c_min_is_monotone(events in prop::collection::vec(0u8..3, 1..50), e in 0u8..3) {
        if let Some((lo, _)) = naive_curves(&events, e, 50) {
            let trace = EventTrace::new(events.iter().map(|x| ((b'A' + x) as char).to_string()));
            let (cmin, _) = min_max_curves(&trace, &((b'A' + e) as char).to_string(), 50).unwrap();
            prop_assert_eq!(&cmin.values, &lo);
            prop_assert!(cmin.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn one_nn_ignores_affine_rescaling(
        points in prop::collection::vec(prop::collection::vec(-50f64..50.0, 3), 4..30),
        scale in prop::collection::vec(0.01f64..100.0, 3),
        offset in prop::collection::vec(-1e3f64..1e3, 3),
        query in prop::collection::vec(-60f64..60.0, 3),
    ) {
        let labels: Vec<Label> = (0..points.len()).map(|i| if i % 2 == 0 { Label::Normal } else { Label::Anomalous }).collect();
        let rescale = |x: &[f64]| -> Vec<f64> { x.iter().zip(&scale).zip(&offset).map(|((v, s), o)| v * s + o).collect() };
        let a = LabeledSet::new(points.clone(), labels.clone()).unwrap();
        let b = LabeledSet::new(points.iter().map(|p| rescale(p)).collect(), labels).unwrap();
        let ma = knn_train(&a, 1, Metric::Euclidean).unwrap();
        let mb = knn_train(&b, 1, Metric::Euclidean).unwrap();
        prop_assert_eq!(ma.predict(&query).unwrap(), mb.predict(&rescale(&query)).unwrap());
    }

    #[test]
    fn c45_fits_separable_data(
        pts in prop::collection::vec((-10f64..10.0, -10f64..10.0), 4..60),
        gap in 1.0f64..5.0,
    ) {
        // class decided by the first coordinate with a margin
        let x: Vec<Vec<f64>> = pts.iter().enumerate().map(|(i, &(a, b))| {
            let a = if i % 2 == 0 { a.abs() + gap } else { -a.abs() - gap };
            vec![a, b]
        }).collect();
        let y: Vec<Label> = (0..x.len()).map(|i| if i % 2 == 0 { Label::Anomalous } else { Label::Normal }).collect();
        let data = LabeledSet::new(x, y).unwrap();
        let m = c45_train(&data, 1, 0.25).unwrap();
        prop_assert_eq!(m.accuracy(&data).unwrap(), 1.0);
        for r in &m.rules {
            prop_assert!(r.pessimistic_error <= 1.0);
        }
    }
}
