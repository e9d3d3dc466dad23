use std::fs;
use std::path::Path;

use valvetime_core::network::lump_coincident_sinks;
use valvetime_core::{parse_network, Error, Network, Result};

/// Reads a network document, or the `network` member of a worst-case
/// instance document, and merges coincident demand nodes.
pub fn load_network(path: &Path) -> Result<Network> {
    let text = fs::read_to_string(path)?;
    let net = parse_document(&text)?;
    let lumped = lump_coincident_sinks(&net)?;
    let merged = net.demands.len() - lumped.demands.len();
    if merged > 0 {
        eprintln!(
            "note: merged {merged} coincident demand node{} into {} demand nodes",
            if merged == 1 { "" } else { "s" },
            lumped.demands.len()
        );
    }
    Ok(lumped)
}

fn parse_document(text: &str) -> Result<Network> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    match value.get("network") {
        Some(inner) => parse_network(&inner.to_string()),
        None => parse_network(text),
    }
}

pub fn require_input(path: Option<&Path>) -> Result<&Path> {
    path.ok_or_else(|| Error::Domain("this command needs --input".into()))
}
