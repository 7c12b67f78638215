//! Binary grid container.
//!
//! Layout: magic, format version, a length-prefixed JSON header, then per
//! layer the little-endian `f64` arrays (z, s, weights, scale), per
//! transition the CSR arrays, the two distortion vectors, a JSON warning
//! list, and finally a SHA-256 digest of everything before it.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{LayerGrid, QuantizedChain, StartSpec, Transition};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"PDMPQGRD";

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    p: f64,
    #[serde(rename = "N")]
    n: usize,
    dim: usize,
    start_spec: StartSpec,
    layer_sizes: Vec<usize>,
    transition_nnz: Vec<usize>,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        for x in v {
            self.0.extend_from_slice(&x.to_le_bytes());
        }
    }
    fn bytes(&mut self, b: &[u8]) {
        self.u64(b.len() as u64);
        self.0.extend_from_slice(b);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Corrupt(format!("unexpected end of data at byte {}", self.at)))?;
        let out = &self.buf[self.at..end];
        self.at = end;
        Ok(out)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn len(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Corrupt("length overflow".into()))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Corrupt("length overflow".into()))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
    fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.len()?;
        self.take(n)
    }
}

pub fn encode(chain: &QuantizedChain) -> Vec<u8> {
    let dim = chain.layers[0].dim;
    let header = Header {
        version: FORMAT_VERSION,
        p: chain.p,
        n: chain.horizon(),
        dim,
        start_spec: chain.start.clone(),
        layer_sizes: chain.layer_sizes(),
        transition_nnz: chain.transitions.iter().map(|t| t.cols.len()).collect(),
    };
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u32(FORMAT_VERSION);
    w.bytes(&serde_json::to_vec(&header).expect("header serializes"));
    for l in &chain.layers {
        w.u64(l.index as u64);
        w.f64s(&l.z);
        w.f64s(&l.s);
        w.f64s(&l.weights);
        w.f64s(&l.scale);
    }
    for t in &chain.transitions {
        for &r in &t.row_ptr {
            w.u64(r as u64);
        }
        for &c in &t.cols {
            w.u32(c);
        }
        w.f64s(&t.probs);
    }
    w.f64s(&chain.distortion_z);
    w.f64s(&chain.distortion_s);
    w.bytes(&serde_json::to_vec(&chain.warnings).expect("warnings serialize"));
    let digest = Sha256::digest(&w.0);
    w.0.extend_from_slice(&digest);
    w.0
}

pub fn decode(buf: &[u8]) -> Result<QuantizedChain> {
    if buf.len() < MAGIC.len() + 4 + 32 {
        return Err(Error::Corrupt("file too short".into()));
    }
    if &buf[..8] != MAGIC {
        return Err(Error::Corrupt("bad magic".into()));
    }
    let version = u32::from_le_bytes(buf[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch { found: version, expected: FORMAT_VERSION });
    }
    let (body, digest) = buf.split_at(buf.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Corrupt("checksum mismatch".into()));
    }
    let mut r = Reader { buf: body, at: 12 };
    let header: Header =
        serde_json::from_slice(r.bytes()?).map_err(|e| Error::Corrupt(format!("header: {e}")))?;
    if header.layer_sizes.len() != header.n + 1 || header.transition_nnz.len() != header.n {
        return Err(Error::Corrupt("header sizes disagree with horizon".into()));
    }
    let dim = header.dim;
    let mut layers = Vec::with_capacity(header.n + 1);
    for &k in &header.layer_sizes {
        let index = r.len()?;
        let z = r.f64s(k * dim)?;
        let s = r.f64s(k)?;
        let weights = r.f64s(k)?;
        let scale = r.f64s(dim + 1)?;
        layers.push(LayerGrid { index, dim, z, s, weights, scale });
    }
    let mut transitions = Vec::with_capacity(header.n);
    for (n, &nnz) in header.transition_nnz.iter().enumerate() {
        let rows = header.layer_sizes[n];
        let row_ptr = (0..=rows).map(|_| r.len()).collect::<Result<Vec<_>>>()?;
        let cols = (0..nnz).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let probs = r.f64s(nnz)?;
        if row_ptr.last() != Some(&nnz) || row_ptr.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Corrupt(format!("transition {n} row pointers are inconsistent")));
        }
        transitions.push(Transition { row_ptr, cols, probs });
    }
    let distortion_z = r.f64s(header.n + 1)?;
    let distortion_s = r.f64s(header.n + 1)?;
    let warnings: Vec<String> =
        serde_json::from_slice(r.bytes()?).map_err(|e| Error::Corrupt(format!("warnings: {e}")))?;
    if r.at != body.len() {
        return Err(Error::Corrupt("trailing bytes".into()));
    }
    let chain = QuantizedChain { p: header.p, start: header.start_spec, layers, transitions, distortion_z, distortion_s, warnings };
    chain.check().map_err(|e| Error::Corrupt(e.to_string()))?;
    Ok(chain)
}

pub fn save_chain(chain: &QuantizedChain, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode(chain))?;
    Ok(())
}

pub fn load_chain(path: impl AsRef<Path>) -> Result<QuantizedChain> {
    decode(&fs::read(path)?)
}

/// Human-readable export with the same content as the binary file.
pub fn to_json(chain: &QuantizedChain) -> Result<String> {
    Ok(serde_json::to_string_pretty(chain)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> QuantizedChain {
        let l0 = LayerGrid::new(0, 1, vec![0.0], vec![0.0], vec![1.0], vec![1.0, 1.0]);
        let l1 = LayerGrid::new(1, 1, vec![0.1, 0.4], vec![0.3, 0.7], vec![0.25, 0.75], vec![0.2, 0.3]);
        QuantizedChain {
            p: 2.0,
            start: StartSpec::Fixed(vec![0.0]),
            layers: vec![l0, l1],
            transitions: vec![Transition::from_dense(&[vec![0.25, 0.75]])],
            distortion_z: vec![0.0, 0.123_456_789_012_345_67],
            distortion_s: vec![0.0, 1.0 / 3.0],
            warnings: vec!["note".into()],
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let c = toy();
        let back = decode(&encode(&c)).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.distortion_z[1].to_bits(), c.distortion_z[1].to_bits());
    }

    #[test]
    fn truncation_and_tampering_are_detected() {
        let bytes = encode(&toy());
        for cut in [0, 10, 40, bytes.len() - 1] {
            assert!(matches!(decode(&bytes[..cut]), Err(Error::Corrupt(_))), "cut {cut}");
        }
        let mut flipped = bytes.clone();
        flipped[60] ^= 1;
        assert!(matches!(decode(&flipped), Err(Error::Corrupt(_))));
    }

    #[test]
    fn version_is_checked() {
        let mut bytes = encode(&toy());
        bytes[8] = 9;
        assert!(matches!(decode(&bytes), Err(Error::VersionMismatch { found: 9, .. })));
    }

    #[test]
    fn json_export_parses_back() {
        let c = toy();
        let back: QuantizedChain = serde_json::from_str(&to_json(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
