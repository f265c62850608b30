//! The `MLRH` matrix file: 4-byte magic, 1-byte dtype (0 = f32, 1 = i8),
//! rows and cols as little-endian u32, then the row-major payload.

use std::path::Path;

use crate::codec::{read_file, write_atomic, Decoder};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

pub const MATRIX_MAGIC: &[u8; 4] = b"MLRH";
pub const MATRIX_HEADER_LEN: usize = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    F32,
    I8,
}

impl DType {
    pub fn code(self) -> u8 {
        match self {
            DType::F32 => 0,
            DType::I8 => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(DType::F32),
            1 => Some(DType::I8),
            _ => None,
        }
    }

    pub fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::I8 => 1,
        }
    }
}

/// Serialise a matrix to the `MLRH` byte layout.
pub fn encode_matrix(m: &DenseMatrix, dtype: DType) -> Result<Vec<u8>> {
    let rows = u32::try_from(m.rows()).map_err(|_| Error::usage("too many rows for u32"))?;
    let cols = u32::try_from(m.cols()).map_err(|_| Error::usage("too many cols for u32"))?;
    let mut out = Vec::with_capacity(MATRIX_HEADER_LEN + m.as_slice().len() * dtype.size());
    out.extend_from_slice(MATRIX_MAGIC);
    out.push(dtype.code());
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    match dtype {
        DType::F32 => {
            for &v in m.as_slice() {
                let narrow = v as f32;
                if !narrow.is_finite() {
                    return Err(Error::usage(format!("value {v:e} does not fit in f32")));
                }
                out.extend_from_slice(&narrow.to_le_bytes());
            }
        }
        DType::I8 => {
            if !m.is_sign_matrix() {
                return Err(Error::usage("i8 payload requires every entry to be -1 or +1"));
            }
            out.extend(m.as_slice().iter().map(|&v| (v as i8) as u8));
        }
    }
    Ok(out)
}

pub(crate) fn decode_matrix(d: &mut Decoder<'_>) -> Result<(DenseMatrix, DType)> {
    d.expect_magic(MATRIX_MAGIC)?;
    let at = d.offset();
    let code = d.u8("dtype")?;
    let dtype =
        DType::from_code(code).ok_or_else(|| Error::format(at, format!("unknown dtype {code}")))?;
    let rows = d.u32("rows")? as usize;
    let cols = d.u32("cols")? as usize;
    let count = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(dtype.size()))
        .ok_or_else(|| Error::format(d.offset(), "payload size overflows"))?;
    let payload_at = d.offset();
    let payload = d.bytes(count, "payload")?;
    let data: Vec<f64> = match dtype {
        DType::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
        DType::I8 => payload.iter().map(|&b| b as i8 as f64).collect(),
    };
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::format(
            payload_at + (i * dtype.size()) as u64,
            "non-finite value in payload",
        ));
    }
    Ok((DenseMatrix::from_vec(rows, cols, data)?, dtype))
}

/// Parse a whole buffer as one matrix file.
pub fn decode_matrix_bytes(buf: &[u8]) -> Result<(DenseMatrix, DType)> {
    let mut d = Decoder::new(buf);
    let out = decode_matrix(&mut d)?;
    d.finish()?;
    Ok(out)
}

pub fn save_matrix(m: &DenseMatrix, dtype: DType, path: &Path) -> Result<()> {
    let bytes = encode_matrix(m, dtype)?;
    write_atomic(path, &bytes)
}

/// Load any matrix file; entries are widened to `f64`.
pub fn load_matrix(path: &Path) -> Result<DenseMatrix> {
    let buf = read_file(path)?;
    decode_matrix_bytes(&buf)
        .map(|(m, _)| m)
        .map_err(|e| e.context(path.display()))
}

/// Load a ±1 label matrix (c×n). Each column must contain at least one +1.
pub fn load_labels(path: &Path) -> Result<DenseMatrix> {
    let buf = read_file(path)?;
    let (m, dtype) = decode_matrix_bytes(&buf).map_err(|e| e.context(path.display()))?;
    if let Some(i) = m.as_slice().iter().position(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::format(
            (MATRIX_HEADER_LEN + i * dtype.size()) as u64,
            format!("{}: label entry {} is not ±1", path.display(), m.as_slice()[i]),
        ));
    }
    super::check_label_columns(&m).map_err(|e| e.context(path.display()))?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SeededRng;

    #[test]
    fn f32_two_by_two() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        let m = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        save_matrix(&m, DType::F32, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"MLRH");
        assert_eq!(bytes[4], 0);
        assert_eq!(&bytes[5..9], &2u32.to_le_bytes());
        assert_eq!(&bytes[13..17], &1.0f32.to_le_bytes());
        assert_eq!(bytes.len(), 13 + 16);
        assert_eq!(load_matrix(&path).unwrap(), m);
    }

    #[test]
    fn i8_round_trip_and_rejection() {
        let m = DenseMatrix::from_rows(&[[1.0, -1.0, 1.0]]).unwrap();
        let bytes = encode_matrix(&m, DType::I8).unwrap();
        assert_eq!(&bytes[13..], &[1u8, 0xFF, 1]);
        assert_eq!(decode_matrix_bytes(&bytes).unwrap().0, m);
        let bad = DenseMatrix::from_rows(&[[1.0, 0.5]]).unwrap();
        assert!(matches!(encode_matrix(&bad, DType::I8), Err(Error::Usage(_))));
    }

    #[test]
    fn wrong_magic() {
        let mut bytes = encode_matrix(&DenseMatrix::identity(2), DType::F32).unwrap();
        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(
            decode_matrix_bytes(&bytes),
            Err(Error::Format { offset: 0, .. })
        ));
    }

    #[test]
    fn truncated_and_oversized_payload() {
        let bytes = encode_matrix(&DenseMatrix::identity(2), DType::F32).unwrap();
        match decode_matrix_bytes(&bytes[..bytes.len() - 1]) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 13),
            other => panic!("{other:?}"),
        }
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(
            decode_matrix_bytes(&long),
            Err(Error::Format { offset: 29, .. })
        ));
    }

    #[test]
    fn unknown_dtype() {
        let mut bytes = encode_matrix(&DenseMatrix::identity(1), DType::F32).unwrap();
        bytes[4] = 7;
        assert!(matches!(
            decode_matrix_bytes(&bytes),
            Err(Error::Format { offset: 4, .. })
        ));
    }

    #[test]
    fn labels_reject_zero_and_all_negative_columns() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("y.bin");
        let zero = DenseMatrix::from_rows(&[[1.0, 0.0]]).unwrap();
        save_matrix(&zero, DType::F32, &p).unwrap();
        assert!(matches!(load_labels(&p), Err(Error::Format { offset: 17, .. })));
        let neg = DenseMatrix::from_rows(&[[1.0, -1.0], [-1.0, -1.0]]).unwrap();
        save_matrix(&neg, DType::I8, &p).unwrap();
        assert!(load_labels(&p).is_err());
    }

    #[test]
    fn round_trip_random_f32() {
        let mut rng = SeededRng::new(9);
        for _ in 0..100 {
            let r = 1 + rng.below(6);
            let c = 1 + rng.below(6);
            let m = DenseMatrix::from_fn(r, c, |_, _| (rng.gaussian() as f32) as f64);
            let bytes = encode_matrix(&m, DType::F32).unwrap();
            assert_eq!(decode_matrix_bytes(&bytes).unwrap().0, m);
        }
    }
}
