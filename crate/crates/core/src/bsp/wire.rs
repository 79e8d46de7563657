//! Binary encoding of partial matches exchanged between sites.
//!
//! A record is a little-endian `u32` byte length followed by: query size
//! `n` (`u32`), origin fragment (`u32`), provenance bitmap (`u64`), touched
//! bitmap (`u64`), `n` vertex ids (`u32`, `u32::MAX` for NULL) and the
//! internal-vertex bitmap (`u64`). A batch is a concatenation of records.

use thiserror::Error;

use crate::fragment::FragmentId;
use crate::matcher::PartialMatch;
use crate::rdf::VertexId;

pub const NULL_VERTEX: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("truncated record at byte {0}")]
    Truncated(usize),
    #[error("record at byte {offset} declares {declared} bytes but its fields need {needed}")]
    LengthMismatch {
        offset: usize,
        declared: usize,
        needed: usize,
    },
    #[error("vertex id {0} collides with the NULL sentinel")]
    ReservedVertexId(u32),
}

pub fn record_len(n: usize) -> usize {
    4 + 4 + 4 + 8 + 8 + 4 * n + 8
}

pub fn encode_record(
    out: &mut Vec<u8>,
    origin: FragmentId,
    pm: &PartialMatch,
) -> Result<(), WireError> {
    let n = pm.func.len();
    out.reserve(record_len(n));
    out.extend_from_slice(&((record_len(n) - 4) as u32).to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&origin.0.to_le_bytes());
    out.extend_from_slice(&pm.provenance.to_le_bytes());
    out.extend_from_slice(&pm.touched.to_le_bytes());
    for v in &pm.func {
        let id = match v {
            Some(VertexId(NULL_VERTEX)) => return Err(WireError::ReservedVertexId(NULL_VERTEX)),
            Some(VertexId(id)) => *id,
            None => NULL_VERTEX,
        };
        out.extend_from_slice(&id.to_le_bytes());
    }
    out.extend_from_slice(&pm.internal.to_le_bytes());
    Ok(())
}

pub fn encode_batch<'a>(
    origin: FragmentId,
    items: impl IntoIterator<Item = &'a PartialMatch>,
) -> Result<Vec<u8>, WireError> {
    let mut out = Vec::new();
    for pm in items {
        encode_record(&mut out, origin, pm)?;
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], WireError> {
        let slice = self
            .bytes
            .get(self.pos..self.pos + N)
            .ok_or(WireError::Truncated(self.pos))?;
        self.pos += N;
        Ok(slice.try_into().unwrap())
    }

    fn u32(&mut self) -> Result<u32, WireError> {
        self.take::<4>().map(u32::from_le_bytes)
    }

    fn u64(&mut self) -> Result<u64, WireError> {
        self.take::<8>().map(u64::from_le_bytes)
    }
}

/// Decodes a batch into `(origin, match)` pairs.
pub fn decode_batch(bytes: &[u8]) -> Result<Vec<(FragmentId, PartialMatch)>, WireError> {
    let mut r = Reader { bytes, pos: 0 };
    let mut out = Vec::new();
    while r.pos < bytes.len() {
        let offset = r.pos;
        let declared = r.u32()? as usize;
        let n = r.u32()? as usize;
        let needed = record_len(n) - 4;
        if declared != needed {
            return Err(WireError::LengthMismatch {
                offset,
                declared,
                needed,
            });
        }
        if bytes.len() - offset < record_len(n) {
            return Err(WireError::Truncated(offset));
        }
        let origin = FragmentId(r.u32()?);
        let provenance = r.u64()?;
        let touched = r.u64()?;
        let mut func = Vec::with_capacity(n);
        for _ in 0..n {
            let id = r.u32()?;
            func.push((id != NULL_VERTEX).then_some(VertexId(id)));
        }
        let internal = r.u64()?;
        out.push((
            origin,
            PartialMatch {
                func,
                internal,
                provenance,
                touched,
            },
        ));
    }
    Ok(out)
}
