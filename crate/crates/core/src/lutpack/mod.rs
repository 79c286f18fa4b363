//! Sampled look-up tables cached from the reference network, the `.rclt`
//! container and the table-size formulas.

mod format;
mod size;
mod transfer;

pub use format::{read_file, write_file, FORMAT_VERSION, MAGIC};
pub use size::{format_bytes, size_formula, topology_bytes, SizeEstimate, SizeKind};
pub use transfer::{export, sample_points, transfer_block1, transfer_block4, transfer_rc};

use crate::error::{Error, Result};

/// Levels per input dimension when sampling at interval 2^4.
pub const SAMPLES: usize = 17;
/// Entries of a full-resolution one-input table.
pub const FULL: usize = 256;
/// `17^4` lattice points of a sampled 4D table.
pub const GRID4: usize = SAMPLES * SAMPLES * SAMPLES * SAMPLES;

/// Table for one offset of an RC module.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lut1D {
    /// Offset `i * N + j` inside the `N x N` window.
    pub offset_index: usize,
    /// 17 entries (sampled) or 256 (full).
    pub entries: Vec<u8>,
}

impl Lut1D {
    pub fn sample_count(&self) -> usize {
        self.entries.len()
    }

    pub fn is_sampled(&self) -> bool {
        self.entries.len() == SAMPLES
    }
}

/// Sampled 2x2-window table, index order `(i0, i1, i2, i3)` row-major, then channel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lut4D {
    pub out_channels: usize,
    pub entries: Vec<u8>,
}

impl Lut4D {
    #[inline]
    pub fn entry(&self, idx: usize, channel: usize) -> u8 {
        self.entries[idx * self.out_channels + channel]
    }
}

/// Full-resolution one-input, multi-output table (`256 x out_channels`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LutPixel {
    pub out_channels: usize,
    pub entries: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BlockTable {
    Grid4(Lut4D),
    Pixel(LutPixel),
}

impl BlockTable {
    pub fn out_channels(&self) -> usize {
        match self {
            BlockTable::Grid4(t) => t.out_channels,
            BlockTable::Pixel(t) => t.out_channels,
        }
    }

    pub fn bytes(&self) -> usize {
        match self {
            BlockTable::Grid4(t) => t.entries.len(),
            BlockTable::Pixel(t) => t.entries.len(),
        }
    }

    /// Spatial extent of the block input window.
    pub fn span(&self) -> usize {
        match self {
            BlockTable::Grid4(_) => 2,
            BlockTable::Pixel(_) => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BranchTables {
    /// `N*N` tables ordered by offset; empty when the branch has no RC module.
    pub rc: Vec<Lut1D>,
    pub block: BlockTable,
}

impl BranchTables {
    /// RC kernel size, 1 when there is no RC module.
    pub fn rc_size(&self) -> usize {
        if self.rc.is_empty() {
            1
        } else {
            (self.rc.len() as f64).sqrt().round() as usize
        }
    }

    pub fn window(&self) -> usize {
        self.rc_size() + self.block.span() - 1
    }

    pub fn bytes(&self) -> usize {
        self.rc.iter().map(|t| t.entries.len()).sum::<usize>() + self.block.bytes()
    }
}

/// The deployable artifact: every table of every stage and branch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LutPack {
    pub scale: usize,
    /// Whether inference averages the four 90-degree rotations.
    pub rotation_ensemble: bool,
    pub stages: Vec<Vec<BranchTables>>,
}

impl LutPack {
    /// Sum of entry bytes; the container header is not counted.
    pub fn total_bytes(&self) -> usize {
        self.stages.iter().flatten().map(|b| b.bytes()).sum()
    }

    pub fn table_count(&self) -> usize {
        self.stages.iter().flatten().map(|b| b.rc.len() + 1).sum()
    }

    /// Checks the topology against the declared table shapes.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::TopologyMismatch(m));
        if self.scale == 0 || self.scale > 255 {
            return bad(format!("scale {} out of range", self.scale));
        }
        if self.stages.is_empty() {
            return bad("pack has no stages".into());
        }
        let last = self.stages.len() - 1;
        for (s, stage) in self.stages.iter().enumerate() {
            if stage.is_empty() {
                return bad(format!("stage {s} has no branches"));
            }
            let heads = if s == last { self.scale * self.scale } else { 1 };
            for (b, br) in stage.iter().enumerate() {
                let n = br.rc_size();
                if !br.rc.is_empty() && n * n != br.rc.len() {
                    return bad(format!("s{s}.b{b}: {} RC tables is not a square", br.rc.len()));
                }
                for (k, t) in br.rc.iter().enumerate() {
                    if t.offset_index != k {
                        return bad(format!("s{s}.b{b}: RC table {k} has offset {}", t.offset_index));
                    }
                    if t.entries.len() != SAMPLES && t.entries.len() != FULL {
                        return bad(format!("s{s}.b{b}.rc{k}: {} entries", t.entries.len()));
                    }
                }
                if br.block.out_channels() != heads {
                    return bad(format!(
                        "s{s}.b{b}: block has {} outputs, expected {heads}",
                        br.block.out_channels()
                    ));
                }
                let (len, want) = match &br.block {
                    BlockTable::Grid4(t) => (t.entries.len(), GRID4 * t.out_channels),
                    BlockTable::Pixel(t) => (t.entries.len(), FULL * t.out_channels),
                };
                if len != want {
                    return bad(format!("s{s}.b{b}: block has {len} entries, expected {want}"));
                }
            }
        }
        Ok(())
    }
}
