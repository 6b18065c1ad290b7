mod common;

use common::*;
use latchflow_harness::{scripted_keyword_detector, Annotation};
use proptest::prelude::*;
use serde_json::json;

fn annotations() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0f64..3.5, 0.05f64..0.6), 0..4)
        .prop_map(|v| v.into_iter().map(|(s, d)| (s, (s + d).min(4.0))).collect())
}

fn script() -> impl Strategy<Value = Vec<(u64, &'static str)>> {
    // one entry per window index, as in a scenario file
    prop::collection::btree_map(0u64..13, prop::sample::select(vec!["get_time", "agenda", "no_such_skill"]), 0..4)
        .prop_map(|m| m.into_iter().collect())
}

fn scenario_for(duration_s: f64, ann: &[(f64, f64)], script: &[(u64, &str)], seed: u64) -> serde_json::Value {
    json!({
        "audio_source": {"synthetic": {"duration_s": duration_s, "noise_std": 0.02}},
        "annotations": ann.iter().map(|(s, e)| json!({"start_s": s, "end_s": e})).collect::<Vec<_>>(),
        "interpreter_script": script.iter()
            .map(|(i, id)| json!({"trigger_window_index": i, "interpretation": {"skill_id": id}}))
            .collect::<Vec<_>>(),
        "time_limit_s": duration_s + 1.0,
        "seed": seed
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn closed_gate_starves_the_interpreter(dur in 1.0f64..4.0, script in script(), seed in any::<u64>()) {
        let g = graph_with(|v| *node_params(v, "kws") = json!({"detector": "constant", "value": false}));
        let s = scenario_json(scenario_for(dur, &[], &script, seed));
        let r = run(&g, &s);
        prop_assert_eq!(r.windows.delivered, 0);
        prop_assert_eq!(r.latches["attended_windows"].forwarded, 0);
        prop_assert!(r.interpretations.is_empty());
        prop_assert!(r.skill_invocations.is_empty());
    }

    #[test]
    fn windows_are_conserved_and_gated_by_overlap(ann in annotations(), script in script(), seed in any::<u64>()) {
        let s = scenario_json(scenario_for(4.0, &ann, &script, seed));
        let r = run(&graph(), &s);
        prop_assert!(r.is_completed());
        prop_assert!(r.counters_conserved());
        prop_assert_eq!(r.windows.emitted, (64_000 - 16_000) / 4_000 + 1);
        prop_assert!(r.windows.conserved());

        // oracle: window k spans [k/4, k/4 + 1)
        let anns: Vec<Annotation> = ann.iter()
            .map(|(a, b)| Annotation { start_s: *a, end_s: *b, label: String::new() })
            .collect();
        let attended: Vec<u64> = (0..r.windows.emitted)
            .filter(|k| scripted_keyword_detector(*k as f64 * 0.25, *k as f64 * 0.25 + 1.0, &anns))
            .collect();
        prop_assert_eq!(r.windows.delivered, attended.len() as u64);

        let expected: Vec<&str> = script.iter()
            .filter(|(i, id)| attended.contains(i) && *id != "no_such_skill")
            .map(|(_, id)| *id)
            .collect();
        let mut got: Vec<&str> = r.skill_invocations.iter().map(|i| i.skill_id.as_str()).collect();
        let mut want = expected.clone();
        got.sort_unstable();
        want.sort_unstable();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn replay_is_deterministic(ann in annotations(), script in script(), seed in any::<u64>()) {
        let s = scenario_json(scenario_for(4.0, &ann, &script, seed));
        prop_assert_eq!(run(&graph(), &s).to_json(), run(&graph(), &s).to_json());
    }
}
