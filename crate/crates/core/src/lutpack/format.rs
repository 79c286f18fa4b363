//! Binary `.rclt` container.
//!
//! ```text
//! magic "RCLT" | version u16 | scale u8 | flags u8 | table_count u16
//! per table: id_len u16 | id utf8 | kind u8 | dims u32 | out_channels u32
//!            | sample_count u32 | sample_count^dims * out_channels bytes
//! crc32 u32 over every table payload, in file order
//! ```
//! Integers are little-endian. Table ids are `s{S}.b{B}.rc{K}` for RC
//! offsets and `s{S}.b{B}.blk` for blocks; kinds are 1 (RC), 2 (4D block)
//! and 3 (one-input multi-output block). Flag bit 0 enables the rotation
//! ensemble; the other bits must be zero.

use std::collections::BTreeMap;
use std::path::Path;

use super::{BlockTable, BranchTables, Lut1D, Lut4D, LutPack, LutPixel, FULL, SAMPLES};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"RCLT";
pub const FORMAT_VERSION: u16 = 1;

const KIND_RC: u8 = 1;
const KIND_GRID4: u8 = 2;
const KIND_PIXEL: u8 = 3;

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptPack(msg.into())
}

impl LutPack {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let count = u16::try_from(self.table_count()).map_err(|_| corrupt("too many tables"))?;
        let mut out = Vec::with_capacity(self.total_bytes() + 64 * self.table_count() + 16);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.push(self.scale as u8);
        out.push(self.rotation_ensemble as u8);
        out.extend_from_slice(&count.to_le_bytes());
        let mut crc = crc32fast::Hasher::new();
        let mut table = |id: String, kind: u8, dims: u32, out_ch: usize, samples: usize, data: &[u8]| {
            out.extend_from_slice(&(id.len() as u16).to_le_bytes());
            out.extend_from_slice(id.as_bytes());
            out.push(kind);
            out.extend_from_slice(&dims.to_le_bytes());
            out.extend_from_slice(&(out_ch as u32).to_le_bytes());
            out.extend_from_slice(&(samples as u32).to_le_bytes());
            out.extend_from_slice(data);
            crc.update(data);
        };
        for (s, stage) in self.stages.iter().enumerate() {
            for (b, br) in stage.iter().enumerate() {
                for t in &br.rc {
                    let id = format!("s{s}.b{b}.rc{}", t.offset_index);
                    table(id, KIND_RC, 1, 1, t.entries.len(), &t.entries);
                }
                let id = format!("s{s}.b{b}.blk");
                match &br.block {
                    BlockTable::Grid4(t) => table(id, KIND_GRID4, 4, t.out_channels, SAMPLES, &t.entries),
                    BlockTable::Pixel(t) => table(id, KIND_PIXEL, 1, t.out_channels, FULL, &t.entries),
                }
            }
        }
        out.extend_from_slice(&crc.finalize().to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = r.u16()?;
        if version != FORMAT_VERSION {
            return Err(corrupt(format!("unsupported version {version}")));
        }
        let scale = r.u8()? as usize;
        let flags = r.u8()?;
        if flags > 1 {
            return Err(corrupt(format!("unknown flags {flags:#04x}")));
        }
        let count = r.u16()? as usize;
        let mut crc = crc32fast::Hasher::new();
        // (stage, branch) -> (rc tables, block)
        let mut branches: BTreeMap<(usize, usize), (Vec<Lut1D>, Option<BlockTable>)> = BTreeMap::new();
        for _ in 0..count {
            let id_len = r.u16()? as usize;
            let id = std::str::from_utf8(r.take(id_len)?)
                .map_err(|_| corrupt("table id is not UTF-8"))?
                .to_string();
            let kind = r.u8()?;
            let dims = r.u32()?;
            let out_ch = r.u32()? as usize;
            let samples = r.u32()? as usize;
            let len = (samples as u128)
                .checked_pow(dims)
                .and_then(|v| v.checked_mul(out_ch as u128))
                .filter(|&v| v <= bytes.len() as u128)
                .ok_or_else(|| corrupt(format!("table {id}: payload larger than file")))?
                as usize;
            let data = r.take(len)?.to_vec();
            crc.update(&data);
            let (s, b, part) = parse_id(&id)?;
            let entry = branches.entry((s, b)).or_default();
            match (kind, part) {
                (KIND_RC, Some(k)) => {
                    if dims != 1 || out_ch != 1 || (samples != SAMPLES && samples != FULL) {
                        return Err(corrupt(format!("table {id}: bad RC shape")));
                    }
                    entry.0.push(Lut1D {
                        offset_index: k,
                        entries: data,
                    });
                }
                (KIND_GRID4, None) | (KIND_PIXEL, None) => {
                    if entry.1.is_some() {
                        return Err(corrupt(format!("duplicate table {id}")));
                    }
                    entry.1 = Some(if kind == KIND_GRID4 {
                        if dims != 4 || samples != SAMPLES {
                            return Err(corrupt(format!("table {id}: bad 4D shape")));
                        }
                        BlockTable::Grid4(Lut4D {
                            out_channels: out_ch,
                            entries: data,
                        })
                    } else {
                        if dims != 1 || samples != FULL {
                            return Err(corrupt(format!("table {id}: bad one-input shape")));
                        }
                        BlockTable::Pixel(LutPixel {
                            out_channels: out_ch,
                            entries: data,
                        })
                    });
                }
                _ => return Err(corrupt(format!("table {id}: kind {kind} does not match id"))),
            }
        }
        let stored = r.u32()?;
        if r.pos != bytes.len() {
            return Err(corrupt("trailing bytes after checksum"));
        }
        if stored != crc.finalize() {
            return Err(corrupt("checksum mismatch"));
        }
        let mut stages: Vec<Vec<BranchTables>> = Vec::new();
        for ((s, b), (mut rc, block)) in branches {
            if s != stages.len() && s + 1 != stages.len() {
                return Err(corrupt(format!("stage {s} is not contiguous")));
            }
            if s == stages.len() {
                stages.push(Vec::new());
            }
            if b != stages[s].len() {
                return Err(corrupt(format!("s{s}: branch {b} is not contiguous")));
            }
            let block = block.ok_or_else(|| corrupt(format!("s{s}.b{b}: missing block table")))?;
            rc.sort_by_key(|t| t.offset_index);
            stages[s].push(BranchTables { rc, block });
        }
        let pack = LutPack {
            scale,
            rotation_ensemble: flags & 1 == 1,
            stages,
        };
        pack.validate().map_err(|e| corrupt(e.to_string()))?;
        Ok(pack)
    }
}

fn parse_id(id: &str) -> Result<(usize, usize, Option<usize>)> {
    let bad = || corrupt(format!("malformed table id {id:?}"));
    let mut parts = id.split('.');
    let num = |p: Option<&str>, prefix: &str| -> Result<usize> {
        p.and_then(|p| p.strip_prefix(prefix))
            .and_then(|n| n.parse().ok())
            .ok_or_else(bad)
    };
    let s = num(parts.next(), "s")?;
    let b = num(parts.next(), "b")?;
    let last = parts.next().ok_or_else(bad)?;
    if parts.next().is_some() {
        return Err(bad());
    }
    let part = if last == "blk" {
        None
    } else {
        Some(num(Some(last), "rc")?)
    };
    Ok((s, b, part))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| corrupt("truncated"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn write_file(pack: &LutPack, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, pack.to_bytes()?).map_err(|e| Error::io(path, e))
}

pub fn read_file(path: impl AsRef<Path>) -> Result<LutPack> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    LutPack::from_bytes(&bytes)
}
