//! Binary feature archive.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! header:  b"AWEF" | u32 format_version | u32 feature_dim | u64 count
//! record:  str id | str word_label | str speaker_id | str language_id
//!          | u32 T | u32 width | T*width f32 (row-major)
//! str:     u32 byte length | UTF-8 bytes
//! ```
//!
//! An empty `word_label` string means the segment is unlabeled. The per-record
//! width is redundant with the header but lets a reader name the offending
//! segment when an archive mixes frame widths.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{DataError, FeatureSegment, Frames, SegmentStore};

pub const ARCHIVE_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"AWEF";
const MAX_STR: u32 = 1 << 20;

pub fn save_segments(store: &SegmentStore, path: impl AsRef<Path>) -> Result<(), DataError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&ARCHIVE_VERSION.to_le_bytes())?;
    w.write_all(&(store.feature_dim() as u32).to_le_bytes())?;
    w.write_all(&(store.len() as u64).to_le_bytes())?;
    for seg in store {
        write_str(&mut w, &seg.id)?;
        write_str(&mut w, seg.word_label.as_deref().unwrap_or(""))?;
        write_str(&mut w, &seg.speaker_id)?;
        write_str(&mut w, &seg.language_id)?;
        w.write_all(&(seg.frames.len() as u32).to_le_bytes())?;
        w.write_all(&(seg.frames.dim() as u32).to_le_bytes())?;
        for v in seg.frames.as_slice() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_segments(path: impl AsRef<Path>) -> Result<SegmentStore, DataError> {
    let mut r = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 4];
    read_header(&mut r, &mut magic)?;
    if &magic != MAGIC {
        return Err(DataError::BadHeader("not a feature archive".into()));
    }
    let version = header_u32(&mut r)?;
    if version != ARCHIVE_VERSION {
        return Err(DataError::UnsupportedVersion(version));
    }
    let feature_dim = header_u32(&mut r)? as usize;
    let mut buf = [0u8; 8];
    read_header(&mut r, &mut buf)?;
    let count = u64::from_le_bytes(buf);

    let mut store = SegmentStore::new(feature_dim);
    for record in 0..count as usize {
        let seg = read_record(&mut r, record)?;
        if seg.frames.dim() != feature_dim {
            return Err(DataError::DimensionMismatch {
                id: seg.id,
                expected: feature_dim,
                found: seg.frames.dim(),
                record: Some(record),
            });
        }
        store.push(seg).map_err(|e| match e {
            DataError::DuplicateId { id, .. } => DataError::DuplicateId {
                id,
                record: Some(record),
            },
            other => DataError::Malformed {
                record,
                reason: other.to_string(),
            },
        })?;
    }

    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(DataError::Malformed {
            record: count as usize,
            reason: "trailing bytes after last record".into(),
        });
    }
    Ok(store)
}

fn read_record(r: &mut impl Read, record: usize) -> Result<FeatureSegment, DataError> {
    let malformed = |e: io::Error| match e.kind() {
        io::ErrorKind::UnexpectedEof => DataError::Malformed {
            record,
            reason: "truncated record".into(),
        },
        _ => DataError::Io(e),
    };
    let id = read_str(r, record)?;
    let label = read_str(r, record)?;
    let speaker_id = read_str(r, record)?;
    let language_id = read_str(r, record)?;
    let rows = read_u32(r).map_err(malformed)? as usize;
    let width = read_u32(r).map_err(malformed)? as usize;
    if rows == 0 {
        return Err(DataError::Malformed {
            record,
            reason: format!("segment `{id}` has zero frames"),
        });
    }
    let mut bytes = vec![0u8; rows * width * 4];
    r.read_exact(&mut bytes).map_err(malformed)?;
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(FeatureSegment {
        id,
        frames: Frames::new(rows, width, data),
        word_label: (!label.is_empty()).then_some(label),
        speaker_id,
        language_id,
    })
}

fn read_header(r: &mut impl Read, buf: &mut [u8]) -> Result<(), DataError> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => DataError::BadHeader("truncated header".into()),
        _ => DataError::Io(e),
    })
}

fn header_u32(r: &mut impl Read) -> Result<u32, DataError> {
    let mut b = [0u8; 4];
    read_header(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u32(r: &mut impl Read) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_str(r: &mut impl Read, record: usize) -> Result<String, DataError> {
    let truncated = || DataError::Malformed {
        record,
        reason: "truncated record".into(),
    };
    let len = read_u32(r).map_err(|_| truncated())?;
    if len > MAX_STR {
        return Err(DataError::Malformed {
            record,
            reason: format!("string length {len} exceeds limit"),
        });
    }
    let mut bytes = vec![0u8; len as usize];
    r.read_exact(&mut bytes).map_err(|_| truncated())?;
    String::from_utf8(bytes).map_err(|_| DataError::Malformed {
        record,
        reason: "invalid UTF-8 in string field".into(),
    })
}

fn write_str(w: &mut impl Write, s: &str) -> io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}
