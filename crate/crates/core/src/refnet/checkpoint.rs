//! Parameter checkpoints: a text manifest followed by little-endian `f32`
//! arrays.
//!
//! ```text
//! RCLUT-CKPT 1
//! config {"scale":4,...}
//! meta iteration 1200
//! array s0.b0.rc.w 9x64 0
//! array s0.b0.rc.b 9x64 2304
//! end
//! <binary payload>
//! ```
//!
//! Offsets are relative to the first payload byte.

use std::collections::BTreeMap;
use std::path::Path;

use super::config::NetworkConfig;
use crate::error::{Error, Result};

const MAGIC: &str = "RCLUT-CKPT 1";

#[derive(Clone, Debug, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: NetworkConfig,
    pub meta: BTreeMap<String, String>,
    pub arrays: Vec<NamedArray>,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptCheckpoint(msg.into())
}

impl Checkpoint {
    pub fn array(&self, name: &str) -> Option<&NamedArray> {
        self.arrays.iter().find(|a| a.name == name)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut head = String::new();
        head.push_str(MAGIC);
        head.push('\n');
        head.push_str("config ");
        head.push_str(&self.config.to_json());
        head.push('\n');
        for (k, v) in &self.meta {
            head.push_str(&format!("meta {k} {v}\n"));
        }
        let mut offset = 0usize;
        for a in &self.arrays {
            let dims: Vec<String> = a.shape.iter().map(|d| d.to_string()).collect();
            head.push_str(&format!("array {} {} {}\n", a.name, dims.join("x"), offset));
            offset += a.data.len() * 4;
        }
        head.push_str("end\n");
        let mut out = head.into_bytes();
        out.reserve(offset);
        for a in &self.arrays {
            for v in &a.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let end = find_subslice(bytes, b"\nend\n").ok_or_else(|| corrupt("missing manifest terminator"))?;
        let head = std::str::from_utf8(&bytes[..end]).map_err(|_| corrupt("manifest is not UTF-8"))?;
        let payload = &bytes[end + 5..];
        let mut lines = head.lines();
        if lines.next() != Some(MAGIC) {
            return Err(corrupt("bad magic"));
        }
        let mut config = None;
        let mut meta = BTreeMap::new();
        let mut arrays = Vec::new();
        for line in lines {
            let (tag, rest) = line.split_once(' ').ok_or_else(|| corrupt(format!("bad line {line:?}")))?;
            match tag {
                "config" => {
                    config = Some(
                        serde_json::from_str::<NetworkConfig>(rest)
                            .map_err(|e| corrupt(format!("config: {e}")))?,
                    )
                }
                "meta" => {
                    let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                    meta.insert(k.to_string(), v.to_string());
                }
                "array" => {
                    let parts: Vec<&str> = rest.split(' ').collect();
                    if parts.len() != 3 {
                        return Err(corrupt(format!("bad array line {line:?}")));
                    }
                    let shape = parts[1]
                        .split('x')
                        .map(|d| d.parse::<usize>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| corrupt(format!("bad shape in {line:?}")))?;
                    let offset: usize = parts[2].parse().map_err(|_| corrupt("bad offset"))?;
                    let len: usize = shape.iter().product();
                    let slice = payload
                        .get(offset..offset + len * 4)
                        .ok_or_else(|| corrupt(format!("array {} runs past the payload", parts[0])))?;
                    let data = slice
                        .chunks_exact(4)
                        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                        .collect();
                    arrays.push(NamedArray {
                        name: parts[0].to_string(),
                        shape,
                        data,
                    });
                }
                other => return Err(corrupt(format!("unknown manifest tag {other:?}"))),
            }
        }
        let expected: usize = arrays.iter().map(|a| a.data.len() * 4).sum();
        if expected != payload.len() {
            return Err(corrupt(format!(
                "payload is {} bytes, manifest describes {expected}",
                payload.len()
            )));
        }
        Ok(Checkpoint {
            config: config.ok_or_else(|| corrupt("missing config line"))?,
            meta,
            arrays,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn find_subslice(hay: &[u8], needle: &[u8]) -> Option<usize> {
    hay.windows(needle.len()).position(|w| w == needle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn sample() -> Checkpoint {
        let mut meta = BTreeMap::new();
        meta.insert("iteration".into(), "12".into());
        Checkpoint {
            config: presets::preset("rclut-3").unwrap(),
            meta,
            arrays: vec![
                NamedArray {
                    name: "a".into(),
                    shape: vec![2, 3],
                    data: vec![1.0, -2.5, 3.25, 0.0, f32::MIN_POSITIVE, 7.0],
                },
                NamedArray {
                    name: "b".into(),
                    shape: vec![1],
                    data: vec![0.5],
                },
            ],
        }
    }

    #[test]
    fn round_trip() {
        let ck = sample();
        assert_eq!(Checkpoint::from_bytes(&ck.to_bytes()).unwrap(), ck);
    }

    #[test]
    fn truncation_detected() {
        let bytes = sample().to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(Checkpoint::from_bytes(&bytes[..10]).is_err());
    }
}
