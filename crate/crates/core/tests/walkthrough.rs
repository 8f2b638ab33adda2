//! Three monitored looks driven through the analysis entry point with
//! injected statistics.

use serde_json::Value;
use wlrgs::cli::analyse_look;
use wlrgs::config::{parse_designs, DesignConfig};
use wlrgs::gs::{Decision, Integrator};
use wlrgs::wlrt::WlrResult;
use wlrgs::Error;

const POPLAR: &str = include_str!("../../../configs/poplar_redesign.json");

fn config(spending: Value) -> DesignConfig {
    let mut v: Value = serde_json::from_str(POPLAR).unwrap();
    v["spending"] = spending;
    parse_designs(&v.to_string(), "test").unwrap().remove(0)
}

fn stat(v: f64, z: f64) -> WlrResult {
    WlrResult {
        u: z * v.sqrt(),
        v,
        z,
        weights: Vec::new(),
        n_events: 0,
    }
}

const LOOKS: [(f64, f64); 3] = [(50.4, -0.91), (78.1, -1.53), (97.2, -2.37)];

#[test]
fn information_spending_walk() {
    let cfg = config(serde_json::json!({"kind": "hsd", "gamma": -4, "max_info": 103.4}));
    let it = Integrator::precise();
    let mut state = None;
    let mut criticals = Vec::new();
    for (k, (v, z)) in LOOKS.into_iter().enumerate() {
        let (next, report) = analyse_look(&cfg, state, &stat(v, z), None, None, false, &it).unwrap();
        criticals.push(report.look.critical);
        let want = if k < 2 { Decision::Continue } else { Decision::Reject };
        assert_eq!(report.look.decision, want);
        state = Some(next);
    }
    assert!((criticals[0] + 2.770).abs() <= 0.001, "{criticals:?}");
    assert!((criticals[1] + 2.42).abs() <= 0.005, "{criticals:?}");
    assert!((criticals[2] + 2.00).abs() <= 0.005, "{criticals:?}");
}

#[test]
fn fixed_spending_walk_and_stagewise_p() {
    let cfg = config(serde_json::json!({"kind": "fixed", "cum_alphas": [0.00301, 0.0106, 0.025]}));
    let it = Integrator::precise();
    let mut state = None;
    let mut last = None;
    for (v, z) in LOOKS {
        let (next, report) = analyse_look(&cfg, state, &stat(v, z), None, None, false, &it).unwrap();
        state = Some(next);
        last = Some(report);
    }
    let report = last.unwrap();
    assert_eq!(report.look.decision, Decision::Reject);
    assert!((report.look.critical + 2.01).abs() <= 0.005);
    let p = report.stagewise_p.unwrap();
    assert!((p - 0.015).abs() <= 0.001, "p {p}");
}

#[test]
fn futility_is_reported_but_does_not_touch_the_boundary() {
    let cfg = config(serde_json::json!({"kind": "hsd", "gamma": -4, "max_info": 103.4}));
    let it = Integrator::precise();
    let (_, with) = analyse_look(&cfg, None, &stat(50.4, 0.5), None, Some(0.0), false, &it).unwrap();
    let (_, without) = analyse_look(&cfg, None, &stat(50.4, 0.5), None, None, false, &it).unwrap();
    assert!(with.stopped);
    assert!(!without.stopped);
    assert_eq!(with.look.critical, without.look.critical);
}

#[test]
fn state_from_another_design_is_rejected() {
    let hsd = config(serde_json::json!({"kind": "hsd", "gamma": -4, "max_info": 103.4}));
    let fixed = config(serde_json::json!({"kind": "fixed", "cum_alphas": [0.00301, 0.0106, 0.025]}));
    let it = Integrator::precise();
    let (state, _) = analyse_look(&hsd, None, &stat(50.4, -0.91), None, None, false, &it).unwrap();
    let err = analyse_look(&fixed, Some(state), &stat(78.1, -1.53), None, None, false, &it).unwrap_err();
    assert!(matches!(err, Error::State(_)));
    assert_eq!(err.exit_code(), 3);
}
