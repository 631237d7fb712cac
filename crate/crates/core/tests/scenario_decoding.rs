//! Every single-field corruption of a valid scenario document is rejected.

use opinet::scenario_io::{decode_scenario, encode_scenario};
use opinet::{Case, Error, ScenarioTemplate};
use serde_json::{json, Value};

fn valid_doc(case: Case) -> Value {
    let (scenario, _) = ScenarioTemplate::new(case, 8).sample(11).unwrap();
    serde_json::from_str(&encode_scenario(&scenario).unwrap()).unwrap()
}

fn corruptions(doc: &Value) -> Vec<(String, Value)> {
    let n = doc["num_nodes"].as_u64().unwrap();
    let edge = doc["edges"][0].clone();
    let mut out = Vec::new();
    let mut set = |label: &str, field: &str, value: Value| {
        let mut d = doc.clone();
        d[field] = value;
        out.push((format!("{field}: {label}"), d));
    };

    set("zero", "num_nodes", json!(0));
    set("negative", "num_nodes", json!(-3));
    set("string", "num_nodes", json!("eight"));
    set("larger than opinions", "num_nodes", json!(n + 1));
    set("smaller than an endpoint", "num_nodes", json!(n - 1));

    let with_edge = |e: Value| {
        let mut edges = doc["edges"].as_array().unwrap().clone();
        edges[0] = e;
        Value::Array(edges)
    };
    set(
        "dangling endpoint",
        "edges",
        with_edge(json!([0, n + 90, 1.0])),
    );
    set("self-loop", "edges", with_edge(json!([2, 2, 1.0])));
    set(
        "trust above one",
        "edges",
        with_edge(json!([edge[0], edge[1], 1.5])),
    );
    set(
        "negative trust",
        "edges",
        with_edge(json!([edge[0], edge[1], -0.1])),
    );
    set(
        "two-element edge",
        "edges",
        with_edge(json!([edge[0], edge[1]])),
    );
    let mut dup = doc["edges"].as_array().unwrap().clone();
    dup.push(json!([edge[1], edge[0], edge[2]]));
    set("duplicate reversed edge", "edges", Value::Array(dup));
    set("not an array", "edges", json!({}));

    let with_opinion = |x: Value| {
        let mut ops = doc["opinions"].as_array().unwrap().clone();
        ops[1] = x;
        Value::Array(ops)
    };
    set("above one", "opinions", with_opinion(json!(1.5)));
    set("below minus one", "opinions", with_opinion(json!(-1.01)));
    set("string entry", "opinions", with_opinion(json!("0.2")));
    let mut short = doc["opinions"].as_array().unwrap().clone();
    short.pop();
    set("too short", "opinions", Value::Array(short));

    set("unknown case", "case", json!("case9"));
    set("unknown propagation", "propagation", json!("gossip"));
    set("zero", "source_trust", json!(0.0));
    set("above one", "source_trust", json!(1.5));
    set("negative", "seed", json!(-1));
    set("unknown family", "topology", json!("lattice"));
    set("float", "seed", json!(1.5));
    set("unknown node", "active_blockers", json!([n + 4]));
    set("duplicate", "active_blockers", json!([1, 1]));
    set("negative", "time", json!(-2));

    for field in [
        "num_nodes",
        "edges",
        "opinions",
        "case",
        "propagation",
        "source_trust",
        "seed",
    ] {
        let mut d = doc.clone();
        d.as_object_mut().unwrap().remove(field);
        out.push((format!("{field}: missing"), d));
    }
    let mut extra = doc.clone();
    extra["colour"] = json!("red");
    out.push(("unknown field".into(), extra));
    out
}

#[test]
fn single_field_corruptions_are_rejected() {
    for case in [Case::Case1, Case::Case2, Case::Case3] {
        let doc = valid_doc(case);
        assert!(decode_scenario(&doc.to_string()).is_ok());
        for (label, bad) in corruptions(&doc) {
            match decode_scenario(&bad.to_string()) {
                Err(e) => assert!(matches!(e, Error::Decode { .. }), "{label}: {e}"),
                Ok(_) => panic!("{case:?} accepted corruption `{label}`"),
            }
        }
    }
}

#[test]
fn propagation_must_suit_the_case() {
    let mut doc = valid_doc(Case::Case1);
    doc["propagation"] = json!("degroot");
    assert!(decode_scenario(&doc.to_string()).is_err());
}

#[test]
fn truncated_text_is_rejected() {
    let text = valid_doc(Case::Case2).to_string();
    for cut in [1, text.len() / 3, text.len() - 1] {
        assert!(decode_scenario(&text[..cut]).is_err());
    }
}
