//! Table-size formulas and binary-unit formatting.

use std::fmt;

use super::{FULL, GRID4, SAMPLES};
use crate::error::{Error, Result};
use crate::refnet::{BlockKind, NetworkConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SizeKind {
    /// `(2^8)^(n^2) * r^2`
    FullSrLut,
    /// `(2^4 + 1)^(n^2) * r^2`
    SampledSrLut,
    /// `2^8 * n^2 * r^2`
    Full1D,
}

impl std::str::FromStr for SizeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full_srlut" | "full" => Ok(SizeKind::FullSrLut),
            "sampled_srlut" | "sampled" => Ok(SizeKind::SampledSrLut),
            "full_1d" | "1d" => Ok(SizeKind::Full1D),
            other => Err(Error::InvalidConfig(format!(
                "unknown size kind {other:?} (full_srlut, sampled_srlut, full_1d)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SizeEstimate {
    Bytes(u128),
    /// Too large for 128-bit arithmetic; carries `log10(bytes)`.
    Astronomical { log10: f64 },
}

pub fn size_formula(kind: SizeKind, n: u32, r: u32) -> Result<SizeEstimate> {
    if n == 0 || r == 0 {
        return Err(Error::InvalidConfig("n and r must be >= 1".into()));
    }
    let r2 = (r as u128) * (r as u128);
    let n2 = n.checked_mul(n).ok_or_else(|| Error::InvalidConfig("n too large".into()))?;
    let power = |base: u128| -> SizeEstimate {
        base.checked_pow(n2)
            .and_then(|v| v.checked_mul(r2))
            .map(SizeEstimate::Bytes)
            .unwrap_or(SizeEstimate::Astronomical {
                log10: n2 as f64 * (base as f64).log10() + (r2 as f64).log10(),
            })
    };
    Ok(match kind {
        SizeKind::FullSrLut => power(256),
        SizeKind::SampledSrLut => power(SAMPLES as u128),
        SizeKind::Full1D => SizeEstimate::Bytes(FULL as u128 * n2 as u128 * r2),
    })
}

const UNITS: [&str; 6] = ["B", "KB", "MB", "GB", "TB", "PB"];

fn trim(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

/// Binary units (1 KB = 1024 B) up to PB; beyond 1024 PB the PB count is
/// written in exponent form, e.g. `6.7e7 PB`.
pub fn format_bytes(bytes: u128) -> String {
    format_log2(None, bytes as f64, Some(bytes))
}

fn format_log2(log10_bytes: Option<f64>, approx: f64, exact: Option<u128>) -> String {
    if let Some(b) = exact {
        if b < 1024 {
            return format!("{b} B");
        }
    }
    let log10 = log10_bytes.unwrap_or_else(|| approx.log10());
    let log10_pb = log10 - 50.0 * 2f64.log10();
    if log10_pb >= 3.0103 {
        // >= 1024 PB
        let exp = log10_pb.floor();
        let mut mant = 10f64.powf(log10_pb - exp);
        let mut exp = exp as i64;
        if (mant * 10.0).round() >= 100.0 {
            mant /= 10.0;
            exp += 1;
        }
        return format!("{:.1}e{} PB", mant, exp);
    }
    let mut v = approx;
    let mut unit = 0;
    while v >= 1024.0 && unit < UNITS.len() - 1 {
        v /= 1024.0;
        unit += 1;
    }
    format!("{} {}", trim(v), UNITS[unit])
}

impl fmt::Display for SizeEstimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            SizeEstimate::Bytes(b) => write!(f, "{}", format_bytes(b)),
            SizeEstimate::Astronomical { log10 } => {
                write!(f, "{}", format_log2(Some(log10), f64::INFINITY, None))
            }
        }
    }
}

/// Entry bytes of the pack `cfg` would export, without running a transfer.
/// `sampled_rc` selects 17-entry (true) or 256-entry RC tables.
pub fn topology_bytes(cfg: &NetworkConfig, sampled_rc: bool) -> Result<u128> {
    cfg.validate()?;
    let per_rc = if sampled_rc { SAMPLES } else { FULL } as u128;
    let mut total = 0u128;
    for stage in &cfg.stages {
        for br in stage {
            let n = br.rc.unwrap_or(0) as u128;
            total += n * n * per_rc;
            total += match br.block {
                BlockKind::In1Out4 => FULL as u128,
                _ => GRID4 as u128,
            } * br.head_channels as u128;
        }
    }
    Ok(total)
}
