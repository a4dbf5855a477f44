//! AFE1 binary embedding files.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "AFE1"
//! 4       4     version, u32 LE (= 1)
//! 8       8     n_rows, u64 LE
//! 16      8     n_cols, u64 LE
//! 24      1     dtype code (0 = f32 LE)
//! 25      4     tag length L, u32 LE
//! 29      L     tag, UTF-8
//! 29+L    4·n_rows·n_cols   payload, row-major f32 LE
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::stats::EmbeddingSet;

pub const MAGIC: &[u8; 4] = b"AFE1";
pub const VERSION: u32 = 1;
pub const DTYPE_F32: u8 = 0;
const FIXED_HEADER: usize = 29;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbeddingFileHeader {
    pub version: u32,
    pub n_rows: u64,
    pub n_cols: u64,
    pub dtype: u8,
    pub tag: String,
}

impl EmbeddingFileHeader {
    pub fn encoded_len(&self) -> usize {
        FIXED_HEADER + self.tag.len()
    }

    fn payload_len(&self) -> Option<u64> {
        self.n_rows.checked_mul(self.n_cols)?.checked_mul(4)
    }
}

fn take<const N: usize>(bytes: &[u8], at: usize) -> Result<[u8; N]> {
    bytes
        .get(at..at + N)
        .map(|s| s.try_into().expect("slice length"))
        .ok_or(Error::TruncatedFile {
            expected: (at + N) as u64,
            actual: bytes.len() as u64,
        })
}

pub fn decode_header(bytes: &[u8]) -> Result<EmbeddingFileHeader> {
    let magic: [u8; 4] = take(bytes, 0).map_err(|_| Error::BadMagic {
        found: bytes[..bytes.len().min(4)].to_vec(),
    })?;
    if &magic != MAGIC {
        return Err(Error::BadMagic { found: magic.to_vec() });
    }
    let version = u32::from_le_bytes(take(bytes, 4)?);
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let n_rows = u64::from_le_bytes(take(bytes, 8)?);
    let n_cols = u64::from_le_bytes(take(bytes, 16)?);
    let [dtype] = take::<1>(bytes, 24)?;
    if dtype != DTYPE_F32 {
        return Err(Error::UnsupportedDtype(dtype));
    }
    let tag_len = u32::from_le_bytes(take(bytes, 25)?) as usize;
    let tag_bytes = bytes.get(FIXED_HEADER..FIXED_HEADER + tag_len).ok_or(Error::TruncatedFile {
        expected: (FIXED_HEADER + tag_len) as u64,
        actual: bytes.len() as u64,
    })?;
    let tag = String::from_utf8(tag_bytes.to_vec())
        .map_err(|_| Error::schema(None, None, "embedding tag is not valid UTF-8"))?;
    Ok(EmbeddingFileHeader {
        version,
        n_rows,
        n_cols,
        dtype,
        tag,
    })
}

pub fn decode(bytes: &[u8]) -> Result<EmbeddingSet> {
    let header = decode_header(bytes)?;
    let start = header.encoded_len();
    let payload = header.payload_len().ok_or(Error::TruncatedFile {
        expected: u64::MAX,
        actual: bytes.len() as u64,
    })?;
    let expected = start as u64 + payload;
    let actual = bytes.len() as u64;
    if actual < expected {
        return Err(Error::TruncatedFile { expected, actual });
    }
    if actual > expected {
        return Err(Error::TrailingBytes { expected, actual });
    }
    let (n, d) = (header.n_rows as usize, header.n_cols as usize);
    if n == 0 || d == 0 {
        return Err(Error::schema(None, None, format!("embedding file must be non-empty, got {n}x{d}")));
    }
    let mut data = Vec::with_capacity(n * d);
    for (k, chunk) in bytes[start..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().expect("chunk of 4"));
        if !v.is_finite() {
            return Err(Error::NonFiniteValue { row: k / d, col: k % d });
        }
        data.push(v as f64);
    }
    EmbeddingSet::new(n, d, data, header.tag)
}

/// Encodes `set` with values rounded to f32. Sets read from AFE1 re-encode to
/// the identical bytes.
pub fn encode(set: &EmbeddingSet) -> Result<Vec<u8>> {
    let tag = set.source_tag().as_bytes();
    let tag_len = u32::try_from(tag.len()).map_err(|_| Error::InvalidArgument("tag too long".into()))?;
    let mut out = Vec::with_capacity(FIXED_HEADER + tag.len() + 4 * set.data().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(set.n_rows() as u64).to_le_bytes());
    out.extend_from_slice(&(set.n_cols() as u64).to_le_bytes());
    out.push(DTYPE_F32);
    out.extend_from_slice(&tag_len.to_le_bytes());
    out.extend_from_slice(tag);
    for (k, &v) in set.data().iter().enumerate() {
        let f = v as f32;
        if !f.is_finite() {
            return Err(Error::NonFiniteValue {
                row: k / set.n_cols(),
                col: k % set.n_cols(),
            });
        }
        out.extend_from_slice(&f.to_le_bytes());
    }
    Ok(out)
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingSet> {
    decode(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

pub fn write_embeddings(set: &EmbeddingSet, path: &Path) -> Result<()> {
    fs::write(path, encode(set)?).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> EmbeddingSet {
        EmbeddingSet::from_rows(&[[1.0, -2.5], [0.125, 3.0], [1e-3, 7.75]], "unit").unwrap()
    }

    #[test]
    fn write_then_read_3x2() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.afe");
        let set = sample();
        write_embeddings(&set, &path).unwrap();
        let back = read_embeddings(&path).unwrap();
        assert_eq!(back.n_rows(), 3);
        assert_eq!(back.source_tag(), "unit");
        for (a, b) in set.data().iter().zip(back.data()) {
            assert_eq!(*a as f32, *b as f32);
        }
        assert_eq!(encode(&back).unwrap(), fs::read(&path).unwrap());
    }

    #[test]
    fn header_layout() {
        let bytes = encode(&sample()).unwrap();
        assert_eq!(&bytes[..4], b"AFE1");
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(bytes[16..24].try_into().unwrap()), 2);
        assert_eq!(bytes[24], 0);
        assert_eq!(u32::from_le_bytes(bytes[25..29].try_into().unwrap()), 4);
        assert_eq!(&bytes[29..33], b"unit");
        assert_eq!(bytes.len(), 33 + 24);
        assert_eq!(f32::from_le_bytes(bytes[33..37].try_into().unwrap()), 1.0);
    }

    #[test]
    fn corrupt_files() {
        let good = encode(&sample()).unwrap();

        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(matches!(decode(&bad_magic), Err(Error::BadMagic { .. })));
        assert!(matches!(decode(b"AF"), Err(Error::BadMagic { .. })));

        let mut more_rows = good.clone();
        more_rows[8..16].copy_from_slice(&5u64.to_le_bytes());
        assert!(matches!(decode(&more_rows), Err(Error::TruncatedFile { .. })));

        let mut trailing = good.clone();
        trailing.push(0);
        assert!(matches!(decode(&trailing), Err(Error::TrailingBytes { .. })));

        let mut dtype = good.clone();
        dtype[24] = 1;
        assert!(matches!(decode(&dtype), Err(Error::UnsupportedDtype(1))));

        let mut version = good.clone();
        version[4] = 2;
        assert!(matches!(decode(&version), Err(Error::UnsupportedVersion(2))));

        let mut nan = good.clone();
        let at = good.len() - 4;
        nan[at..].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode(&nan), Err(Error::NonFiniteValue { row: 2, col: 1 })));

        let mut huge = good;
        huge[8..16].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(matches!(decode(&huge), Err(Error::TruncatedFile { .. })));
    }

    proptest! {
        #[test]
        fn payload_round_trip_is_bit_exact(
            n in 1usize..8,
            d in 1usize..6,
            seed in any::<u32>(),
            tag in "[a-z:/._-]{0,12}",
        ) {
            let data: Vec<f64> = (0..n * d)
                .map(|k| f32::from_bits((seed.wrapping_mul(2654435761).wrapping_add(k as u32 * 40503)) & 0x7f7f_ffff) as f64)
                .map(|v| if v.is_finite() { v } else { 0.0 })
                .collect();
            let set = EmbeddingSet::new(n, d, data, tag).unwrap();
            let bytes = encode(&set).unwrap();
            let back = decode(&bytes).unwrap();
            prop_assert_eq!(&back, &set);
            prop_assert_eq!(encode(&back).unwrap(), bytes);
        }
    }
}
