//! Bit-packed binary codes with exact Hamming linear scan.
//!
//! Code `i` occupies words `[i·wpc, (i+1)·wpc)`; bit `b` lives in bit
//! `b % 64` of word `b / 64`, with +1 stored as 1 and −1 as 0. Padding bits
//! past `bits` are always zero so XOR + popcount needs no masking.

use std::path::Path;

use crate::codec::{read_file, write_atomic, Decoder};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

pub const CODES_MAGIC: &[u8; 4] = b"MLRC";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedCodes {
    n: usize,
    bits: usize,
    words_per_code: usize,
    words: Vec<u64>,
}

impl PackedCodes {
    pub fn from_words(n: usize, bits: usize, words: Vec<u64>) -> Result<Self> {
        if bits == 0 {
            return Err(Error::usage("codes need at least one bit"));
        }
        let wpc = bits.div_ceil(64);
        if words.len() != n * wpc {
            return Err(Error::usage(format!(
                "{} words cannot hold {n} codes of {bits} bits",
                words.len()
            )));
        }
        if !bits.is_multiple_of(64) {
            let pad_mask = !0u64 << (bits % 64);
            if let Some(i) = (0..n).find(|&i| words[(i + 1) * wpc - 1] & pad_mask != 0) {
                return Err(Error::Data(format!("code {i} has non-zero padding bits")));
            }
        }
        Ok(Self {
            n,
            bits,
            words_per_code: wpc,
            words,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn words_per_code(&self) -> usize {
        self.words_per_code
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn code(&self, i: usize) -> &[u64] {
        &self.words[i * self.words_per_code..(i + 1) * self.words_per_code]
    }

    /// Back to an L×n ±1 matrix.
    pub fn unpack(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.bits, self.n, |b, i| {
            if self.code(i)[b / 64] >> (b % 64) & 1 == 1 {
                1.0
            } else {
                -1.0
            }
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + self.words.len() * 8);
        out.extend_from_slice(CODES_MAGIC);
        out.extend_from_slice(&(self.n as u32).to_le_bytes());
        out.extend_from_slice(&(self.bits as u32).to_le_bytes());
        for w in &self.words {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut d = Decoder::new(buf);
        d.expect_magic(CODES_MAGIC)?;
        let n = d.u32("n")? as usize;
        let at = d.offset();
        let bits = d.u32("bits")? as usize;
        if bits == 0 {
            return Err(Error::format(at, "bit length is zero"));
        }
        let count = n * bits.div_ceil(64);
        let payload_at = d.offset();
        let words = d
            .bytes(count * 8, "payload")?
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        d.finish()?;
        Self::from_words(n, bits, words).map_err(|e| Error::format(payload_at, e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if self.n > u32::MAX as usize || self.bits > u32::MAX as usize {
            return Err(Error::usage("codes too large for the file format"));
        }
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?).map_err(|e| e.context(path.display()))
    }
}

/// Pack the columns of an L×k ±1 matrix.
pub fn pack(h: &DenseMatrix) -> Result<PackedCodes> {
    let (bits, n) = h.shape();
    if bits == 0 {
        return Err(Error::usage("cannot pack zero-length codes"));
    }
    if !h.is_sign_matrix() {
        return Err(Error::usage("pack: entries must be ±1"));
    }
    let wpc = bits.div_ceil(64);
    let mut words = vec![0u64; n * wpc];
    for b in 0..bits {
        for (i, &v) in h.row(b).iter().enumerate() {
            if v > 0.0 {
                words[i * wpc + b / 64] |= 1u64 << (b % 64);
            }
        }
    }
    PackedCodes::from_words(n, bits, words)
}

#[inline]
pub fn hamming_words(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

/// Hamming distance between codes `i` and `j` of the same set.
pub fn hamming(codes: &PackedCodes, i: usize, j: usize) -> Result<u32> {
    if i >= codes.n || j >= codes.n {
        return Err(Error::usage(format!(
            "code index ({i}, {j}) out of range for {} codes",
            codes.n
        )));
    }
    Ok(hamming_words(codes.code(i), codes.code(j)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: u32,
}

/// Every database index ordered by (distance, index), via a counting sort
/// over the `bits + 1` possible distances.
fn full_ranking(db: &PackedCodes, query: &[u64]) -> Vec<Neighbor> {
    let mut dist = Vec::with_capacity(db.n);
    let mut counts = vec![0usize; db.bits + 2];
    for i in 0..db.n {
        let d = hamming_words(db.code(i), query);
        counts[d as usize + 1] += 1;
        dist.push(d);
    }
    for k in 1..counts.len() {
        counts[k] += counts[k - 1];
    }
    let mut out = vec![Neighbor { index: 0, distance: 0 }; db.n];
    for (i, &d) in dist.iter().enumerate() {
        let slot = &mut counts[d as usize];
        out[*slot] = Neighbor { index: i, distance: d };
        *slot += 1;
    }
    out
}

fn check_query(db: &PackedCodes, query: &[u64]) -> Result<()> {
    if query.len() != db.words_per_code {
        return Err(Error::usage(format!(
            "query has {} words, database codes have {}",
            query.len(),
            db.words_per_code
        )));
    }
    Ok(())
}

/// The `k` nearest database codes, sorted by (distance, index).
pub fn knn(db: &PackedCodes, query: &[u64], k: usize) -> Result<Vec<Neighbor>> {
    check_query(db, query)?;
    if k > db.n {
        return Err(Error::usage(format!("k = {k} exceeds database size {}", db.n)));
    }
    let mut ranking = full_ranking(db, query);
    ranking.truncate(k);
    Ok(ranking)
}

/// Full (distance, index) ranking of the database for every query.
pub fn rank_all(db: &PackedCodes, queries: &PackedCodes) -> Result<Vec<Vec<Neighbor>>> {
    if db.bits != queries.bits {
        return Err(Error::usage(format!(
            "database codes have {} bits, queries have {}",
            db.bits, queries.bits
        )));
    }
    Ok((0..queries.n)
        .map(|q| full_ranking(db, queries.code(q)))
        .collect())
}

/// Database indices only, in ranked order; the input the metrics expect.
pub fn rank_indices(db: &PackedCodes, queries: &PackedCodes) -> Result<Vec<Vec<usize>>> {
    Ok(rank_all(db, queries)?
        .into_iter()
        .map(|r| r.into_iter().map(|nb| nb.index).collect())
        .collect())
}
