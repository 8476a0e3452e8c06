//! Binary checkpoint format.
//!
//! ```text
//! "CODN" | version u32 | bins u32 | layer count u32
//! per layer: kind u8 | rank u32 | dims u32 x rank | f32 payload
//! crc32 of everything above
//! ```
//!
//! All integers and floats are little-endian. Parametric layers store the
//! weight dims and a payload of weights followed by `dims[0]` biases; max
//! pooling stores its window as a rank-1 dim; other layers have rank 0.

use std::path::Path;

use crate::error::{Error, Result};
use crate::net::{Layer, LayerParams, ModelParams, NetworkSpec, Tensor};

const MAGIC: &[u8; 4] = b"CODN";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn encode_checkpoint(params: &ModelParams<f32>, spec: &NetworkSpec) -> Result<Vec<u8>> {
    params.check_against(spec)?;
    let mut buf = Vec::with_capacity(16 + params.num_params() * 4);
    buf.extend_from_slice(MAGIC);
    put_u32(&mut buf, CHECKPOINT_VERSION);
    put_u32(&mut buf, spec.bins as u32);
    put_u32(&mut buf, spec.layers.len() as u32);
    for (layer, p) in spec.layers.iter().zip(&params.layers) {
        buf.push(layer.tag());
        match (layer, p) {
            (Layer::Conv { .. } | Layer::Dense { .. }, Some(p)) => {
                put_u32(&mut buf, p.weight.shape().len() as u32);
                for &d in p.weight.shape() {
                    put_u32(&mut buf, d as u32);
                }
                for v in p.weight.data().iter().chain(p.bias.data()) {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
            }
            (Layer::MaxPool { size }, _) => {
                put_u32(&mut buf, 1);
                put_u32(&mut buf, *size as u32);
            }
            _ => put_u32(&mut buf, 0),
        }
    }
    let crc = crc32fast::hash(&buf);
    put_u32(&mut buf, crc);
    Ok(buf)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(ModelParams<f32>, NetworkSpec)> {
    if bytes.len() < 4 {
        return Err(Error::ChecksumMismatch);
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    if crc32fast::hash(body) != u32::from_le_bytes(tail.try_into().unwrap()) {
        return Err(Error::ChecksumMismatch);
    }
    let mut r = Reader { bytes: body, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Malformed("not a checkpoint file".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let bins = r.u32()? as usize;
    let count = r.u32()? as usize;
    let mut layers = Vec::with_capacity(count);
    let mut stored = Vec::with_capacity(count);
    for _ in 0..count {
        let tag = r.u8()?;
        let rank = r.u32()? as usize;
        if rank > 4 {
            return Err(Error::Malformed(format!("layer rank {rank}")));
        }
        let dims = (0..rank)
            .map(|_| r.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let layer = match (tag, dims.as_slice()) {
            (1, &[f, _, k, k2]) if k == k2 => Layer::Conv { filters: f, kernel: k },
            (2, []) => Layer::Relu,
            (3, &[size]) => Layer::MaxPool { size },
            (4, []) => Layer::Flatten,
            (5, &[units, _]) => Layer::Dense { units },
            (6, []) => Layer::Sigmoid,
            _ => return Err(Error::Malformed(format!("bad layer record kind={tag} dims={dims:?}"))),
        };
        let p = if layer.has_params() {
            let nw: usize = dims.iter().product();
            let weight = Tensor::from_vec(dims.clone(), r.f32s(nw)?);
            let bias = Tensor::from_vec(vec![dims[0]], r.f32s(dims[0])?);
            Some(LayerParams { weight, bias })
        } else {
            None
        };
        layers.push(layer);
        stored.push(p);
    }
    if r.pos != body.len() {
        return Err(Error::Malformed("trailing bytes after last layer".into()));
    }
    let spec = NetworkSpec { bins, layers };
    let params = ModelParams { layers: stored };
    params.check_against(&spec)?;
    Ok((params, spec))
}

pub fn save_checkpoint(params: &ModelParams<f32>, spec: &NetworkSpec, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_checkpoint(params, spec)?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(ModelParams<f32>, NetworkSpec)> {
    decode_checkpoint(&std::fs::read(path)?)
}

/// Loads a checkpoint and insists it was trained for `bins`-bin inputs.
pub fn load_checkpoint_for(path: impl AsRef<Path>, bins: usize) -> Result<(ModelParams<f32>, NetworkSpec)> {
    let (params, spec) = load_checkpoint(path)?;
    spec.ensure_bins(bins)?;
    Ok((params, spec))
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

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
            .ok_or_else(|| Error::Malformed("unexpected end of checkpoint".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let raw = self.take(
            n.checked_mul(4)
                .ok_or_else(|| Error::Malformed("size overflow".into()))?,
        )?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::init_params;

    #[test]
    fn roundtrip_is_bitwise() {
        let spec = NetworkSpec::standard(8);
        let params = init_params::<f32>(&spec, 17).unwrap();
        let bytes = encode_checkpoint(&params, &spec).unwrap();
        let (p2, s2) = decode_checkpoint(&bytes).unwrap();
        assert_eq!(s2, spec);
        for (a, b) in params.tensors().zip(p2.tensors()) {
            assert_eq!(a.shape(), b.shape());
            let ab: Vec<u32> = a.data().iter().map(|v| v.to_bits()).collect();
            let bb: Vec<u32> = b.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(ab, bb);
        }
        assert_eq!(encode_checkpoint(&p2, &s2).unwrap(), bytes);
    }

    #[test]
    fn header_layout() {
        let spec = NetworkSpec::standard(8);
        let bytes = encode_checkpoint(&ModelParams::zeros(&spec).unwrap(), &spec).unwrap();
        assert_eq!(&bytes[..4], b"CODN");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 8);
        assert_eq!(
            u32::from_le_bytes(bytes[12..16].try_into().unwrap()),
            spec.layers.len() as u32
        );
        assert_eq!(bytes[16], 1);
    }

    #[test]
    fn truncation_and_corruption_fail_checksum() {
        let spec = NetworkSpec::standard(8);
        let bytes = encode_checkpoint(&init_params(&spec, 1).unwrap(), &spec).unwrap();
        for cut in [0, 3, 16, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(decode_checkpoint(&bytes[..cut]), Err(Error::ChecksumMismatch)));
        }
        let mut flipped = bytes.clone();
        flipped[40] ^= 0x10;
        assert!(matches!(decode_checkpoint(&flipped), Err(Error::ChecksumMismatch)));
    }

    #[test]
    fn version_mismatch() {
        let spec = NetworkSpec::standard(8);
        let mut bytes = encode_checkpoint(&ModelParams::zeros(&spec).unwrap(), &spec).unwrap();
        bytes[4] = 9;
        let n = bytes.len();
        let crc = crc32fast::hash(&bytes[..n - 4]);
        bytes[n - 4..].copy_from_slice(&crc.to_le_bytes());
        assert!(matches!(
            decode_checkpoint(&bytes),
            Err(Error::VersionMismatch { found: 9, .. })
        ));
    }

    #[test]
    fn bins_guard_on_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.codn");
        let spec = NetworkSpec::standard(64);
        save_checkpoint(&ModelParams::zeros(&spec).unwrap(), &spec, &path).unwrap();
        assert!(load_checkpoint_for(&path, 64).is_ok());
        assert!(matches!(
            load_checkpoint_for(&path, 256),
            Err(Error::ShapeMismatch { .. })
        ));
    }
}
