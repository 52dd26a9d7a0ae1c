//! `CRRCKPT1` parameter snapshots.
//!
//! ```text
//! "CRRCKPT1" | version u8 = 1
//! in_ch u32 | mid_ch u32 | channels u32 | K u32 | kernel_size u32
//! delta f64 | m_min f64 | m_max f64 | radius f64
//! flags u8 (1 = difference prefix, 2 = bias, 4 = learnable log-scale)
//! conv1 f64* | conv2 f64* | slopes f64* | bias f64* | log_scale f64
//! iteration u64 | seed u64
//! ```
//!
//! All integers and reals are little-endian.

use std::path::Path;

use super::{CrrArchitecture, CrrParams, SplineBank};
use crate::error::{Error, Result};
use crate::io::Reader;

pub const CKPT_MAGIC: &[u8; 8] = b"CRRCKPT1";
const CKPT_VERSION: u8 = 1;

const FLAG_DIFF: u8 = 1;
const FLAG_BIAS: u8 = 2;
const FLAG_LOG_SCALE: u8 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: CrrParams,
    pub iteration: u64,
    pub seed: u64,
}

pub fn encode_checkpoint(ck: &Checkpoint) -> Vec<u8> {
    let p = &ck.params;
    let a = p.arch();
    let mut out = Vec::new();
    out.extend_from_slice(CKPT_MAGIC);
    out.push(CKPT_VERSION);
    for v in [a.in_ch, a.mid_ch, a.channels, a.half_knots, a.kernel_size] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for v in [a.delta, a.m_min, a.m_max, a.radius] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let mut flags = 0;
    if a.use_diff {
        flags |= FLAG_DIFF;
    }
    if a.use_bias {
        flags |= FLAG_BIAS;
    }
    if a.learn_log_scale {
        flags |= FLAG_LOG_SCALE;
    }
    out.push(flags);
    for v in p
        .conv1
        .iter()
        .chain(&p.conv2)
        .chain(p.splines.slopes())
        .chain(&p.bias)
        .chain(std::iter::once(&p.log_scale))
    {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&ck.iteration.to_le_bytes());
    out.extend_from_slice(&ck.seed.to_le_bytes());
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader::new(bytes);
    let magic = r.take(8).map_err(|_| Error::BadMagic {
        expected: "CRRCKPT1".into(),
        found: String::from_utf8_lossy(bytes).into_owned(),
    })?;
    if magic != CKPT_MAGIC {
        return Err(Error::BadMagic {
            expected: "CRRCKPT1".into(),
            found: String::from_utf8_lossy(magic).into_owned(),
        });
    }
    let version = r.u8()?;
    if version != CKPT_VERSION {
        return Err(Error::BadVersion(version));
    }
    let in_ch = r.u32()? as usize;
    let mid_ch = r.u32()? as usize;
    let channels = r.u32()? as usize;
    let half_knots = r.u32()? as usize;
    let kernel_size = r.u32()? as usize;
    let delta = r.f64()?;
    let m_min = r.f64()?;
    let m_max = r.f64()?;
    let radius = r.f64()?;
    let flags = r.u8()?;
    let arch = CrrArchitecture {
        in_ch,
        mid_ch,
        channels,
        kernel_size,
        half_knots,
        delta,
        use_diff: flags & FLAG_DIFF != 0,
        use_bias: flags & FLAG_BIAS != 0,
        learn_log_scale: flags & FLAG_LOG_SCALE != 0,
        m_min,
        m_max,
        radius,
    };
    arch.validate()?;
    let conv1 = r.f64s(arch.conv1_len())?;
    let conv2 = r.f64s(arch.conv2_len())?;
    let slopes = r.f64s(arch.slopes_len())?;
    let bias = r.f64s(arch.bias_len())?;
    let log_scale = r.f64()?;
    let iteration = r.u64()?;
    let seed = r.u64()?;
    r.finish()?;
    let mut params = CrrParams::with_filters(arch.clone(), conv1, conv2);
    params.splines = SplineBank::from_slopes(channels, half_knots, delta, slopes, m_min, m_max);
    params.bias = bias;
    params.log_scale = log_scale;
    Ok(Checkpoint {
        params,
        iteration,
        seed,
    })
}

pub fn write_checkpoint(path: impl AsRef<Path>, ck: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_checkpoint(ck)).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn round_trip_with_all_flags() {
        let arch = CrrArchitecture {
            mid_ch: 2,
            channels: 3,
            kernel_size: 3,
            half_knots: 4,
            use_diff: true,
            use_bias: true,
            learn_log_scale: true,
            ..Default::default()
        };
        let mut p = CrrParams::init(arch, &mut RngStream::new(4, 0)).unwrap();
        p.bias = vec![0.1, -0.2, 0.3];
        p.log_scale = -0.7;
        p.splines.slopes_mut()[3] = 2.5;
        let ck = Checkpoint {
            params: p,
            iteration: 1234,
            seed: u64::MAX - 3,
        };
        let bytes = encode_checkpoint(&ck);
        let back = decode_checkpoint(&bytes).unwrap();
        assert_eq!(back, ck);
        assert_eq!(encode_checkpoint(&back), bytes);
    }

    #[test]
    fn rejects_wrong_magic_and_truncation() {
        let p = CrrParams::init(
            CrrArchitecture {
                mid_ch: 1,
                channels: 1,
                kernel_size: 1,
                ..Default::default()
            },
            &mut RngStream::new(0, 0),
        )
        .unwrap();
        let bytes = encode_checkpoint(&Checkpoint {
            params: p,
            iteration: 0,
            seed: 0,
        });
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_checkpoint(&bad), Err(Error::BadMagic { .. })));
        assert!(matches!(
            decode_checkpoint(&bytes[..bytes.len() - 1]),
            Err(Error::Truncated { .. })
        ));
    }
}
