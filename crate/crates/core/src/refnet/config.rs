use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Convolution block family following each (optional) RC module.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    /// 2x2 window in, one value out.
    In4Out1,
    /// One pixel in, `head_channels` values out.
    In1Out4,
    /// 2x2 window in, `head_channels` values out.
    In4OutHead,
}

impl BlockKind {
    pub fn inputs(self) -> usize {
        match self {
            BlockKind::In1Out4 => 1,
            _ => 4,
        }
    }

    /// Spatial extent (M) of the block's input window.
    pub fn span(self) -> usize {
        match self {
            BlockKind::In1Out4 => 1,
            _ => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchConfig {
    /// Kernel size N of the reconstructed-convolution module; `None` feeds the
    /// stage input straight into the block.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rc: Option<usize>,
    pub block: BlockKind,
    #[serde(default = "one")]
    pub head_channels: usize,
    /// Overrides the block's spatial extent for the RF calculator only (e.g. the
    /// 3x3 span of hand-crafted multi-pixel indexing patterns). Networks with an
    /// override cannot be built.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_span: Option<usize>,
}

fn one() -> usize {
    1
}

impl BranchConfig {
    pub fn new(rc: Option<usize>, block: BlockKind, head_channels: usize) -> Self {
        BranchConfig {
            rc,
            block,
            head_channels,
            block_span: None,
        }
    }

    pub fn rc_size(&self) -> usize {
        self.rc.unwrap_or(1)
    }

    pub fn span(&self) -> usize {
        self.block_span.unwrap_or_else(|| self.block.span())
    }

    /// Side of the input window feeding one anchor pixel: `N + M - 1`.
    pub fn window(&self) -> usize {
        self.rc_size() + self.span() - 1
    }
}

fn default_scale() -> usize {
    4
}
fn default_true() -> bool {
    true
}
fn default_rc_channels() -> usize {
    64
}
fn default_hidden_width() -> usize {
    64
}
fn default_hidden_depth() -> usize {
    3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    #[serde(default = "default_scale")]
    pub scale: usize,
    pub stages: Vec<Vec<BranchConfig>>,
    #[serde(default = "default_true")]
    pub quantize_between_stages: bool,
    #[serde(default = "default_true")]
    pub rotation_ensemble: bool,
    /// Hidden width C of every RC module.
    #[serde(default = "default_rc_channels")]
    pub rc_channels: usize,
    #[serde(default = "default_hidden_width")]
    pub hidden_width: usize,
    #[serde(default = "default_hidden_depth")]
    pub hidden_depth: usize,
}

impl NetworkConfig {
    pub fn new(scale: usize, stages: Vec<Vec<BranchConfig>>) -> Self {
        NetworkConfig {
            scale,
            stages,
            quantize_between_stages: true,
            rotation_ensemble: true,
            rc_channels: default_rc_channels(),
            hidden_width: default_hidden_width(),
            hidden_depth: default_hidden_depth(),
        }
    }

    pub fn is_final(&self, stage: usize) -> bool {
        stage + 1 == self.stages.len()
    }

    /// Pixels of context on each side that influence an output cell: the sum
    /// over stages of the widest branch window minus one.
    pub fn context_margin(&self) -> usize {
        self.stages
            .iter()
            .map(|stage| stage.iter().map(|b| b.window()).max().unwrap_or(1) - 1)
            .sum()
    }

    /// Structural checks shared by the calculators and the network builder.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.scale == 0 {
            return bad("scale must be >= 1".into());
        }
        if self.stages.is_empty() {
            return bad("at least one stage is required".into());
        }
        for (s, stage) in self.stages.iter().enumerate() {
            if stage.is_empty() {
                return bad(format!("stage {s} has no branches"));
            }
            for (b, br) in stage.iter().enumerate() {
                if br.rc == Some(0) {
                    return bad(format!("stage {s} branch {b}: RC kernel size must be >= 1"));
                }
                if br.block_span == Some(0) {
                    return bad(format!("stage {s} branch {b}: block span must be >= 1"));
                }
                if br.block == BlockKind::In4Out1 && br.head_channels != 1 {
                    return bad(format!("stage {s} branch {b}: in4_out1 blocks have one output"));
                }
                let want = if self.is_final(s) {
                    self.scale * self.scale
                } else {
                    1
                };
                if br.head_channels != want {
                    return bad(format!(
                        "stage {s} branch {b}: head_channels {} (expected {want})",
                        br.head_channels
                    ));
                }
            }
        }
        Ok(())
    }

    /// Additional checks for configs that are turned into trainable networks.
    pub fn validate_executable(&self) -> Result<()> {
        self.validate()?;
        if self.rc_channels == 0 || self.hidden_width == 0 {
            return Err(Error::InvalidConfig("widths must be >= 1".into()));
        }
        for stage in &self.stages {
            for br in stage {
                if br.block_span.is_some_and(|s| s != br.block.span()) {
                    return Err(Error::InvalidConfig(
                        "block_span overrides are only meaningful for the RF calculator".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: NetworkConfig =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serialises")
    }
}
