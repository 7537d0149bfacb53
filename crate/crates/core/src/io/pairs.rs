//! Training-pair container.
//!
//! A pairs file is `"BRPR"`, a u32 LE version, then records, each a u32 LE
//! byte length followed by the payload:
//!
//! ```text
//! u32 len, source id (utf-8)
//! u64 t, u64 k
//! u32 X, u32 Y, u32 Z
//! u32 len, input grid run body (as in the voxel format)
//! u32 len, target grid run body
//! ```
//!
//! All integers are little-endian. A directory of pairs files is indexed by a
//! text manifest, `manifest.txt`:
//!
//! ```text
//! brecs-pairs 1
//! <file name> <record count> <k>
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{GridDims, VoxelGrid};
use crate::io::vox::{decode_runs, encode_runs};
use crate::pipeline::TrainingPair;

pub const PAIRS_MAGIC: &[u8; 4] = b"BRPR";
pub const PAIRS_VERSION: u32 = 1;
pub const MANIFEST_HEADER: &str = "brecs-pairs 1";
pub const MANIFEST_NAME: &str = "manifest.txt";

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_bytes(out: &mut Vec<u8>, b: &[u8]) {
    put_u32(out, b.len());
    out.extend_from_slice(b);
}

fn encode_record(p: &TrainingPair) -> Vec<u8> {
    let mut out = Vec::new();
    put_bytes(&mut out, p.source.as_bytes());
    out.extend_from_slice(&(p.t as u64).to_le_bytes());
    out.extend_from_slice(&(p.k as u64).to_le_bytes());
    for n in p.input.dims().as_array() {
        put_u32(&mut out, n);
    }
    put_bytes(&mut out, encode_runs(p.input.cells()).as_bytes());
    put_bytes(&mut out, encode_runs(p.target.cells()).as_bytes());
    out
}

pub fn encode_pairs(pairs: &[TrainingPair]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(PAIRS_MAGIC);
    out.extend_from_slice(&PAIRS_VERSION.to_le_bytes());
    for p in pairs {
        put_bytes(&mut out, &encode_record(p));
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format("truncated pairs record".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn u64(&mut self) -> Result<usize> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")) as usize)
    }

    fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.u32()?;
        self.take(n)
    }

    fn text(&mut self) -> Result<&'a str> {
        std::str::from_utf8(self.bytes()?).map_err(|e| Error::Format(e.to_string()))
    }

    fn done(&self) -> bool {
        self.pos == self.buf.len()
    }
}

fn decode_record(buf: &[u8]) -> Result<TrainingPair> {
    let mut r = Reader { buf, pos: 0 };
    let source = r.text()?.to_string();
    let t = r.u64()?;
    let k = r.u64()?;
    let dims = GridDims::new(r.u32()?, r.u32()?, r.u32()?)?;
    let input = VoxelGrid::from_cells(dims, decode_runs(r.text()?, dims.len())?)?;
    let target = VoxelGrid::from_cells(dims, decode_runs(r.text()?, dims.len())?)?;
    if !r.done() {
        return Err(Error::Format("trailing bytes in pairs record".into()));
    }
    let pair = TrainingPair {
        source,
        t,
        k,
        input,
        target,
    };
    if !pair.is_superset_consistent() {
        return Err(Error::Format(format!(
            "pair {} t={}: target does not contain input",
            pair.source, pair.t
        )));
    }
    Ok(pair)
}

pub fn decode_pairs(bytes: &[u8]) -> Result<Vec<TrainingPair>> {
    if bytes.len() < 8 || &bytes[..4] != PAIRS_MAGIC {
        return Err(Error::Format("not a pairs file".into()));
    }
    let mut r = Reader { buf: bytes, pos: 4 };
    let version = r.u32()? as u32;
    if version != PAIRS_VERSION {
        return Err(Error::Format(format!(
            "unsupported pairs version {version}"
        )));
    }
    let mut pairs = Vec::new();
    while !r.done() {
        pairs.push(decode_record(r.bytes()?)?);
    }
    Ok(pairs)
}

pub fn read_pairs(path: &Path) -> Result<Vec<TrainingPair>> {
    decode_pairs(&super::read_bytes(path)?)
}

pub fn write_pairs(path: &Path, pairs: &[TrainingPair]) -> Result<()> {
    super::write_atomic(path, &encode_pairs(pairs))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub file: String,
    pub records: usize,
    pub k: usize,
}

pub fn encode_manifest(entries: &[ManifestEntry]) -> String {
    let mut s = format!("{MANIFEST_HEADER}\n");
    for e in entries {
        s.push_str(&format!("{} {} {}\n", e.file, e.records, e.k));
    }
    s
}

pub fn decode_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    let mut lines = text.lines();
    if lines.next() != Some(MANIFEST_HEADER) {
        return Err(Error::Format("bad pairs manifest header".into()));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let bad = || Error::Format(format!("bad manifest line {l:?}"));
            let parts: Vec<&str> = l.split_whitespace().collect();
            let [file, records, k] = parts[..] else {
                return Err(bad());
            };
            Ok(ManifestEntry {
                file: file.to_string(),
                records: records.parse().map_err(|_| bad())?,
                k: k.parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(t: usize) -> TrainingPair {
        let d = GridDims::new(3, 2, 2).unwrap();
        let mut input = VoxelGrid::new(d, false);
        input.set(0, 0, 0, true);
        let mut target = input.clone();
        target.set(2, 1, 1, true);
        TrainingPair {
            source: "chair_0001".into(),
            t,
            k: 8,
            input,
            target,
        }
    }

    #[test]
    fn round_trip() {
        let pairs = vec![pair(0), pair(5)];
        let bytes = encode_pairs(&pairs);
        let back = decode_pairs(&bytes).unwrap();
        assert_eq!(back, pairs);
        assert_eq!(encode_pairs(&back), bytes);
        assert!(decode_pairs(&encode_pairs(&[])).unwrap().is_empty());
    }

    #[test]
    fn rejects_non_superset_and_truncation() {
        let mut p = pair(0);
        std::mem::swap(&mut p.input, &mut p.target);
        assert!(decode_pairs(&encode_pairs(&[p])).is_err());
        let bytes = encode_pairs(&[pair(1)]);
        assert!(decode_pairs(&bytes[..bytes.len() - 2]).is_err());
    }

    #[test]
    fn manifest_round_trip() {
        let entries = vec![
            ManifestEntry {
                file: "batch_000000.pairs".into(),
                records: 32,
                k: 8,
            },
            ManifestEntry {
                file: "batch_000001.pairs".into(),
                records: 32,
                k: 8,
            },
        ];
        let text = encode_manifest(&entries);
        assert_eq!(decode_manifest(&text).unwrap(), entries);
        assert!(decode_manifest("nope\n").is_err());
        assert!(decode_manifest("brecs-pairs 1\na b\n").is_err());
    }
}
