//! Binary index file.
//!
//! All integers little-endian.
//!
//! ```text
//! magic      4 bytes  "ASRX"
//! version    u16
//! header     u32 len, then: mode u8, normalize u8, reserved u16,
//!                            dim u32, count u64, build_seed u64, n_clusters u32
//! ids        u64 len, then per id: u32 byte length + UTF-8 bytes
//! vectors    u64 len, then count*dim f32
//! clusters   u64 len, then per cluster: dim f32 centroid, u32 member count, u32 rows
//! crc32      u32 over every preceding byte
//! ```

use std::fs;
use std::path::Path;

use super::{Cluster, IndexHeader, IndexMode, StyleIndex};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"ASRX";
pub const FORMAT_VERSION: u16 = 1;

const HEADER_LEN: u32 = 1 + 1 + 2 + 4 + 8 + 8 + 4;

impl StyleIndex {
    pub fn to_bytes(&self) -> Vec<u8> {
        let h = &self.header;
        let mut out = Vec::with_capacity(64 + self.vectors.len() * 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());

        out.extend_from_slice(&HEADER_LEN.to_le_bytes());
        out.push(match h.mode {
            IndexMode::Exact => 0,
            IndexMode::Clustered => 1,
        });
        out.push(h.normalize as u8);
        out.extend_from_slice(&0u16.to_le_bytes());
        out.extend_from_slice(&(h.dim as u32).to_le_bytes());
        out.extend_from_slice(&(h.count as u64).to_le_bytes());
        out.extend_from_slice(&h.build_seed.to_le_bytes());
        out.extend_from_slice(&(self.clusters.len() as u32).to_le_bytes());

        let mut section = Vec::new();
        for id in &self.ids {
            section.extend_from_slice(&(id.len() as u32).to_le_bytes());
            section.extend_from_slice(id.as_bytes());
        }
        push_section(&mut out, &section);

        section.clear();
        for v in &self.vectors {
            section.extend_from_slice(&v.to_le_bytes());
        }
        push_section(&mut out, &section);

        section.clear();
        for cl in &self.clusters {
            for c in &cl.centroid {
                section.extend_from_slice(&c.to_le_bytes());
            }
            section.extend_from_slice(&(cl.members.len() as u32).to_le_bytes());
            for m in &cl.members {
                section.extend_from_slice(&m.to_le_bytes());
            }
        }
        push_section(&mut out, &section);

        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<StyleIndex> {
        if bytes.len() < 6 || &bytes[..4] != MAGIC {
            return Err(Error::CorruptFile("bad magic".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version > FORMAT_VERSION || version == 0 {
            return Err(Error::UnsupportedVersion {
                found: version,
                supported: FORMAT_VERSION,
            });
        }
        if bytes.len() < 10 {
            return Err(Error::CorruptFile("truncated".into()));
        }
        let (body, trailer) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(trailer.try_into().expect("4 bytes"));
        if crc32fast::hash(body) != stored {
            return Err(Error::CorruptFile("checksum mismatch".into()));
        }

        let mut r = Reader { buf: body, pos: 6 };
        if r.u32()? != HEADER_LEN {
            return Err(Error::CorruptFile("unexpected header length".into()));
        }
        let mode = match r.u8()? {
            0 => IndexMode::Exact,
            1 => IndexMode::Clustered,
            m => return Err(Error::CorruptFile(format!("unknown mode {m}"))),
        };
        let normalize = r.u8()? != 0;
        r.u16()?;
        let dim = r.u32()? as usize;
        let count = r.u64()? as usize;
        let build_seed = r.u64()?;
        let n_clusters = r.u32()? as usize;

        let mut ids_r = Reader {
            buf: r.section()?,
            pos: 0,
        };
        let mut ids = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let len = ids_r.u32()? as usize;
            let raw = ids_r.take(len)?;
            let id = std::str::from_utf8(raw).map_err(|_| Error::CorruptFile("clip id is not UTF-8".into()))?;
            ids.push(id.to_string());
        }
        ids_r.finish("ids")?;

        let vec_bytes = r.section()?;
        if vec_bytes.len()
            != count
                .checked_mul(dim)
                .and_then(|n| n.checked_mul(4))
                .unwrap_or(usize::MAX)
        {
            return Err(Error::CorruptFile("vector section size".into()));
        }
        let vectors: Vec<f32> = vec_bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();

        let mut cl_r = Reader {
            buf: r.section()?,
            pos: 0,
        };
        let mut clusters = Vec::with_capacity(n_clusters.min(1 << 16));
        for _ in 0..n_clusters {
            let mut centroid = Vec::with_capacity(dim);
            for _ in 0..dim {
                centroid.push(cl_r.f32()?);
            }
            let n = cl_r.u32()? as usize;
            let mut members = Vec::with_capacity(n.min(count));
            for _ in 0..n {
                members.push(cl_r.u32()?);
            }
            clusters.push(Cluster { centroid, members });
        }
        cl_r.finish("clusters")?;
        r.finish("file")?;

        let index = StyleIndex {
            header: IndexHeader {
                format_version: version,
                dim,
                mode,
                normalize,
                count,
                build_seed,
            },
            ids,
            vectors,
            clusters,
        };
        index.check_invariants()?;
        Ok(index)
    }

    /// Writes to a sibling temporary file and renames it over `path`, so
    /// readers never observe a partial index.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        let tmp = std::path::PathBuf::from(tmp);
        fs::write(&tmp, self.to_bytes()).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<StyleIndex> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        StyleIndex::from_bytes(&bytes)
    }
}

fn push_section(out: &mut Vec<u8>, section: &[u8]) {
    out.extend_from_slice(&(section.len() as u64).to_le_bytes());
    out.extend_from_slice(section);
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::CorruptFile("truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn section(&mut self) -> Result<&'a [u8]> {
        let len = usize::try_from(self.u64()?).map_err(|_| Error::CorruptFile("section length".into()))?;
        self.take(len)
    }

    fn finish(&self, what: &str) -> Result<()> {
        if self.pos == self.buf.len() {
            Ok(())
        } else {
            Err(Error::CorruptFile(format!("trailing bytes in {what}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::{ClusterParams, SearchRequest};

    fn sample(clustered: bool) -> StyleIndex {
        let list: Vec<(String, Vec<f32>)> = (0..30)
            .map(|i| {
                let a = i as f32 * 0.7;
                (format!("clip-{i:02}"), vec![a.sin(), a.cos(), i as f32 * 0.01, -0.25])
            })
            .collect();
        if clustered {
            StyleIndex::build_clustered_from(list, &ClusterParams::new(4, 99), false).unwrap()
        } else {
            StyleIndex::build_exact_from(list, false).unwrap()
        }
    }

    #[test]
    fn round_trip() {
        for clustered in [false, true] {
            let idx = sample(clustered);
            let bytes = idx.to_bytes();
            assert_eq!(&bytes[..4], b"ASRX");
            let back = StyleIndex::from_bytes(&bytes).unwrap();
            assert_eq!(back, idx);
            assert_eq!(back.to_bytes(), bytes);
            let q = SearchRequest::new(vec![0.3, -0.2, 1.0, 0.5], 4);
            assert_eq!(back.search(&q).unwrap(), idx.search(&q).unwrap());
        }
    }

    #[test]
    fn truncated_is_corrupt() {
        let bytes = sample(true).to_bytes();
        for cut in [bytes.len() - 1, bytes.len() / 2, 12, 7] {
            assert!(matches!(
                StyleIndex::from_bytes(&bytes[..cut]),
                Err(Error::CorruptFile(_))
            ));
        }
    }

    #[test]
    fn flipped_bit_is_corrupt() {
        let mut bytes = sample(false).to_bytes();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x10;
        assert!(matches!(StyleIndex::from_bytes(&bytes), Err(Error::CorruptFile(_))));
    }

    #[test]
    fn future_version_is_unsupported() {
        let mut bytes = sample(false).to_bytes();
        bytes[4..6].copy_from_slice(&(FORMAT_VERSION + 1).to_le_bytes());
        let n = bytes.len();
        let crc = crc32fast::hash(&bytes[..n - 4]);
        bytes[n - 4..].copy_from_slice(&crc.to_le_bytes());
        assert!(matches!(
            StyleIndex::from_bytes(&bytes),
            Err(Error::UnsupportedVersion { found: 2, supported: 1 })
        ));
    }
}
