use std::collections::BTreeSet;
use std::fmt;

use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer};

use super::{Demands, Edge, Network, Source, Violation};
use crate::error::{Error, Result};

/// Demand pairs in document order, so duplicate keys can be reported instead
/// of silently overwritten.
struct DemandPairs(Vec<(String, f64)>);

impl<'de> Deserialize<'de> for DemandPairs {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct PairVisitor;

        impl<'de> Visitor<'de> for PairVisitor {
            type Value = DemandPairs;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an object mapping sink ids to demands")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<Self::Value, A::Error> {
                let mut pairs = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, f64>()? {
                    pairs.push((k, v));
                }
                Ok(DemandPairs(pairs))
            }
        }

        deserializer.deserialize_map(PairVisitor)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    exponent: f64,
    source: Source,
    sink_head: f64,
    edges: Vec<Edge>,
    demands: DemandPairs,
}

/// Parses and validates a network document.
pub fn parse_network(text: &str) -> Result<Network> {
    let raw: RawNetwork = serde_json::from_str(text)?;

    let mut demands = Demands::new();
    for (id, d) in raw.demands.0 {
        if demands.contains_key(&id) {
            return Err(Error::DuplicateIdentifier(id));
        }
        demands.insert(id, d);
    }
    let mut edge_keys = BTreeSet::new();
    for e in &raw.edges {
        if !edge_keys.insert((e.from.as_str(), e.to.as_str())) {
            return Err(Error::DuplicateIdentifier(format!("{}->{}", e.from, e.to)));
        }
    }

    let net = Network {
        exponent: raw.exponent,
        source: raw.source,
        sink_head: raw.sink_head,
        edges: raw.edges,
        demands,
    };

    let violations = net.validate();
    if let Some(Violation::Cycle { node }) = violations
        .iter()
        .find(|v| matches!(v, Violation::Cycle { .. }))
    {
        return Err(Error::Cycle(node.clone()));
    }
    if let Some(Violation::UnknownDemandNode { node }) = violations
        .iter()
        .find(|v| matches!(v, Violation::UnknownDemandNode { .. }))
    {
        return Err(Error::UnknownNode(node.clone()));
    }
    if !violations.is_empty() {
        return Err(Error::InvalidNetwork(violations));
    }
    Ok(net)
}

/// Serializes a network in the document schema accepted by [`parse_network`].
pub fn to_json(net: &Network) -> String {
    serde_json::to_string_pretty(net).expect("network serialization is infallible")
}

#[cfg(test)]
mod tests {
    use super::*;

    const SINGLE: &str = r#"{
        "exponent": 2,
        "source": {"id": "source", "head": 4},
        "sink_head": 0,
        "edges": [{"from": "source", "to": "s1", "k": 1}],
        "demands": {"s1": 1}
    }"#;

    #[test]
    fn minimal_document() {
        let net = parse_network(SINGLE).unwrap();
        assert_eq!(net.nodes().len(), 2);
        assert_eq!(net.edges.len(), 1);
        assert_eq!(net.demands["s1"], 1.0);
    }

    #[test]
    fn reversed_duplicate_edge_is_a_cycle() {
        let text = SINGLE.replace(
            r#"[{"from": "source", "to": "s1", "k": 1}]"#,
            r#"[{"from": "source", "to": "s1", "k": 1}, {"from": "s1", "to": "source", "k": 1}]"#,
        );
        assert!(matches!(parse_network(&text), Err(Error::Cycle(_))));
    }

    #[test]
    fn demand_on_internal_node_fails_validation() {
        let text = r#"{
            "exponent": 2,
            "source": {"id": "source", "head": 4},
            "sink_head": 0,
            "edges": [{"from": "source", "to": "j", "k": 1}, {"from": "j", "to": "s1", "k": 1}],
            "demands": {"s1": 1, "j": 2}
        }"#;
        match parse_network(text) {
            Err(Error::InvalidNetwork(v)) => {
                assert_eq!(v[0].code(), "DemandOnInternalNode")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_and_duplicates_are_rejected() {
        let extra = SINGLE.replace(r#""sink_head": 0,"#, r#""sink_head": 0, "pumps": [],"#);
        assert!(matches!(parse_network(&extra), Err(Error::Syntax(_))));

        let dup = SINGLE.replace(r#"{"s1": 1}"#, r#"{"s1": 1, "s1": 2}"#);
        assert!(matches!(
            parse_network(&dup),
            Err(Error::DuplicateIdentifier(id)) if id == "s1"
        ));

        let unknown = SINGLE.replace(r#"{"s1": 1}"#, r#"{"s1": 1, "s9": 2}"#);
        assert!(matches!(
            parse_network(&unknown),
            Err(Error::UnknownNode(id)) if id == "s9"
        ));

        assert!(matches!(parse_network("{"), Err(Error::Syntax(_))));
    }

    #[test]
    fn serialization_round_trips() {
        let net = parse_network(SINGLE).unwrap();
        let again = parse_network(&to_json(&net)).unwrap();
        assert_eq!(net, again);
    }
}
