//! Named network topologies.
//!
//! | name              | shape                                                        |
//! |-------------------|--------------------------------------------------------------|
//! | `rclut-default`   | two stages, RC 3/5/7; 2x2 blocks then one 2x2 head + two 1x1 heads |
//! | `srlut-baseline`  | one 2x2 block with an r*r head, no RC                        |
//! | `rc5-plus-srlut`  | RC-5 in front of the baseline block                          |
//! | `rclut-N`         | single stage, single branch RC-N + 2x2 head (N = 3, 5, 7, 9) |
//! | `rclut-3_5` ...   | single stage, one RC-N + 2x2 head branch per listed N        |
//! | `rclut-3_5_7-x2`  | alias of `rclut-default`                                     |
//! | `mulut-shape`     | calculator-only: two stages of three 3x3-span blocks, no RC  |
//! | `rc5-plus-mulut`  | calculator-only: `mulut-shape` with RC-5 ahead of stage one  |

use serde_json::Value;

use crate::error::{Error, Result};
use crate::refnet::{BlockKind, BranchConfig, NetworkConfig};

pub const NAMES: &[&str] = &[
    "rclut-default",
    "rclut-3_5_7-x2",
    "srlut-baseline",
    "rc5-plus-srlut",
    "rclut-3",
    "rclut-5",
    "rclut-7",
    "rclut-9",
    "rclut-3_5",
    "rclut-5_7",
    "rclut-3_5_7",
    "rclut-5_7_9",
    "mulut-shape",
    "rc5-plus-mulut",
];

const SCALE: usize = 4;
const HEAD: usize = SCALE * SCALE;

fn head_branch(rc: Option<usize>) -> BranchConfig {
    BranchConfig::new(rc, BlockKind::In4OutHead, HEAD)
}

fn mulut(rc: Option<usize>) -> NetworkConfig {
    let spanned = |mut b: BranchConfig| {
        b.block_span = Some(3);
        b
    };
    NetworkConfig::new(
        SCALE,
        vec![
            (0..3).map(|_| spanned(BranchConfig::new(rc, BlockKind::In4Out1, 1))).collect(),
            (0..3).map(|_| spanned(head_branch(None))).collect(),
        ],
    )
}

pub fn preset(name: &str) -> Option<NetworkConfig> {
    let single = |sizes: &[usize]| {
        NetworkConfig::new(SCALE, vec![sizes.iter().map(|&n| head_branch(Some(n))).collect()])
    };
    let cfg = match name {
        "rclut-default" | "rclut-3_5_7-x2" => NetworkConfig::new(
            SCALE,
            vec![
                [3, 5, 7]
                    .iter()
                    .map(|&n| BranchConfig::new(Some(n), BlockKind::In4Out1, 1))
                    .collect(),
                vec![
                    BranchConfig::new(Some(3), BlockKind::In1Out4, HEAD),
                    head_branch(Some(5)),
                    BranchConfig::new(Some(7), BlockKind::In1Out4, HEAD),
                ],
            ],
        ),
        "srlut-baseline" => NetworkConfig::new(SCALE, vec![vec![head_branch(None)]]),
        "rc5-plus-srlut" | "rclut-5" => single(&[5]),
        "rclut-3" => single(&[3]),
        "rclut-7" => single(&[7]),
        "rclut-9" => single(&[9]),
        "rclut-3_5" => single(&[3, 5]),
        "rclut-5_7" => single(&[5, 7]),
        "rclut-3_5_7" => single(&[3, 5, 7]),
        "rclut-5_7_9" => single(&[5, 7, 9]),
        "mulut-shape" => mulut(None),
        "rc5-plus-mulut" => mulut(Some(5)),
        _ => return None,
    };
    Some(cfg)
}

/// A preset with the narrower hidden layers used for short desk-scale runs
/// (width 32, depth 2).
pub fn desk(name: &str) -> Option<NetworkConfig> {
    preset(name).map(|mut cfg| {
        cfg.hidden_width = 32;
        cfg.hidden_depth = 2;
        cfg
    })
}

/// Resolves a network description: either a preset name, a full config
/// object, or `{"preset": name, ...overrides}`.
pub fn resolve(value: &Value) -> Result<NetworkConfig> {
    match value {
        Value::String(name) => {
            preset(name).ok_or_else(|| Error::InvalidConfig(format!("unknown preset {name:?}")))
        }
        Value::Object(map) => {
            let mut merged = match map.get("preset") {
                Some(Value::String(name)) => {
                    let base = preset(name)
                        .ok_or_else(|| Error::InvalidConfig(format!("unknown preset {name:?}")))?;
                    serde_json::to_value(base).expect("config serialises")
                }
                Some(_) => return Err(Error::InvalidConfig("preset must be a string".into())),
                None => Value::Object(Default::default()),
            };
            if let Value::Object(m) = &mut merged {
                for (k, v) in map {
                    if k != "preset" {
                        m.insert(k.clone(), v.clone());
                    }
                }
            }
            let cfg: NetworkConfig =
                serde_json::from_value(merged).map_err(|e| Error::InvalidConfig(e.to_string()))?;
            cfg.validate()?;
            Ok(cfg)
        }
        _ => Err(Error::InvalidConfig("network must be a preset name or an object".into())),
    }
}
