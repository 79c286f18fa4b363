//! Receptive-field algebra for one- and two-stage cascades.
//!
//! With the rotation ensemble a stage whose branch window is `W = N + M - 1`
//! (RC kernel `N`, block span `M`) sees `2W - 1` pixels per axis. A second
//! stage extends the first stage's radius by its own window:
//! `RF2 = 2 * ((RF1 - 1) / 2 + W2) - 1`, which expands to
//! `2*M1 + 2*M2 + 2*N1 + 2*N2 - 7`, and to `2*M1 + 2*M2 - 3` without RC.

use super::config::NetworkConfig;
use crate::error::{Error, Result};

pub fn receptive_field(cfg: &NetworkConfig) -> Result<usize> {
    cfg.validate()?;
    let windows: Vec<usize> = cfg
        .stages
        .iter()
        .map(|stage| stage.iter().map(|b| b.window()).max().unwrap_or(1))
        .collect();
    let rf = match (windows.as_slice(), cfg.rotation_ensemble) {
        ([w1], true) => 2 * w1 - 1,
        ([w1], false) => *w1,
        ([w1, w2], true) => {
            let rf1 = 2 * w1 - 1;
            2 * ((rf1 - 1) / 2 + w2) - 1
        }
        ([w1, w2], false) => w1 + w2 - 1,
        _ => return Err(Error::RfOutOfDomain(windows.len())),
    };
    Ok(rf)
}
