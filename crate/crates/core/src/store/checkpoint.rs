//! Binary checkpoint format.
//!
//! ```text
//! magic     8 bytes  "DREMCKPT"
//! version   u32      1
//! kind      u8       0 = drem, 1 = drem-hgn
//! dim       u32
//! heads     u32
//! sizes     5 × u64  words, users, items, brands, categories
//! tables    for each table in layout order:
//!             rows u64, cols u64, rows·cols f64 values, rows·cols f64 accumulators
//! ```
//! All integers and floats are little-endian.

use std::collections::BTreeMap;
use std::path::Path;

use super::{EmbeddingStore, ModelKind, RegistrySizes, StoreSpec, Table, TableId};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"DREMCKPT";
const VERSION: u32 = 1;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Checkpoint("size overflow".into()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("size overflow".into()))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

impl EmbeddingStore {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(match self.spec.kind {
            ModelKind::Drem => 0,
            ModelKind::DremHgn => 1,
        });
        out.extend_from_slice(&(self.spec.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.spec.heads as u32).to_le_bytes());
        let s = self.spec.sizes;
        for n in [s.words, s.users, s.items, s.brands, s.categories] {
            out.extend_from_slice(&(n as u64).to_le_bytes());
        }
        for id in TableId::layout(self.spec.kind) {
            let t = &self.tables[&id];
            out.extend_from_slice(&(t.rows as u64).to_le_bytes());
            out.extend_from_slice(&(t.cols as u64).to_le_bytes());
            for v in t.values.iter().chain(&t.accum) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let kind = match r.u8()? {
            0 => ModelKind::Drem,
            1 => ModelKind::DremHgn,
            k => return Err(Error::Checkpoint(format!("unknown model kind {k}"))),
        };
        let dim = r.u32()? as usize;
        let heads = r.u32()? as usize;
        let sizes = RegistrySizes {
            words: r.usize()?,
            users: r.usize()?,
            items: r.usize()?,
            brands: r.usize()?,
            categories: r.usize()?,
        };
        let spec = StoreSpec {
            kind,
            dim,
            heads,
            sizes,
        };
        // Expected shapes come from a fresh layout of the same spec.
        let expected = EmbeddingStore::init(spec, 0)?;
        let mut tables = BTreeMap::new();
        for id in TableId::layout(kind) {
            let (rows, cols) = (r.usize()?, r.usize()?);
            let want = expected.table(id);
            if (rows, cols) != (want.rows, want.cols) {
                return Err(Error::Checkpoint(format!(
                    "table {id:?} is {rows}x{cols}, expected {}x{}",
                    want.rows, want.cols
                )));
            }
            let values = r.f64s(rows * cols)?;
            let accum = r.f64s(rows * cols)?;
            tables.insert(
                id,
                Table {
                    rows,
                    cols,
                    values,
                    accum,
                },
            );
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Ok(Self { spec, tables })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
