//! The JSON run document: `{"network": <preset name | object>, "train": {...}}`.
//! Command-line flags override its fields.

use std::path::Path;

use rclut::presets;
use rclut::trainer::TrainConfig;
use rclut::{Error, NetworkConfig, Result};
use serde::Deserialize;
use serde_json::Value;

use crate::NetArgs;

pub const DEFAULT_PRESET: &str = "rclut-default";

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunDocument {
    network: Option<Value>,
    #[serde(default)]
    train: TrainConfig,
}

pub struct Settings {
    pub network: NetworkConfig,
    pub train: TrainConfig,
}

fn read_document(path: &Path) -> Result<RunDocument> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
}

pub fn resolve(args: &NetArgs) -> Result<Settings> {
    let doc = match &args.config {
        Some(p) => read_document(p)?,
        None => RunDocument::default(),
    };
    let network = match (&args.preset, &doc.network) {
        (Some(name), _) => presets::resolve(&Value::String(name.clone()))?,
        (None, Some(v)) => presets::resolve(v)?,
        (None, None) => presets::resolve(&Value::String(DEFAULT_PRESET.into()))?,
    };
    Ok(Settings {
        network,
        train: doc.train,
    })
}

/// Effective configuration, printed before every run.
pub fn announce(command: &str, fields: Value) {
    let doc = serde_json::json!({ "command": command, "effective": fields });
    println!("{}", serde_json::to_string(&doc).expect("json"));
}
