//! File formats: TNSR tensors, binary PGM/PPM images, `key=value` sidecars and
//! dataset directories.
//!
//! TNSR layout (all little-endian):
//!
//! ```text
//! "TNSR" | version: u8 = 1 | rank: u32 | rank x extent: u64 | data: f64...
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Dataset, Image, Tensor};

pub const TNSR_MAGIC: &[u8; 4] = b"TNSR";
pub const TNSR_VERSION: u8 = 1;

pub fn encode_tensor(t: &Tensor) -> Result<Vec<u8>> {
    if t.rank() == 0 {
        return Err(Error::ZeroRank);
    }
    let mut out = Vec::with_capacity(9 + 8 * t.rank() + 8 * t.len());
    out.extend_from_slice(TNSR_MAGIC);
    out.push(TNSR_VERSION);
    out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
    for &e in t.shape() {
        out.extend_from_slice(&(e as u64).to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Little-endian cursor with truncation errors.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let available = self.buf.len() - self.pos;
        if n > available {
            return Err(Error::Truncated {
                needed: n,
                available,
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or(Error::Truncated {
            needed: usize::MAX,
            available: self.buf.len() - self.pos,
        })?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::InvalidArgument(format!(
                "{} trailing bytes after payload",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

pub fn decode_tensor(bytes: &[u8]) -> Result<Tensor> {
    let mut r = Reader::new(bytes);
    let magic = r.take(4).map_err(|_| Error::BadMagic {
        expected: "TNSR".into(),
        found: String::from_utf8_lossy(bytes).into_owned(),
    })?;
    if magic != TNSR_MAGIC {
        return Err(Error::BadMagic {
            expected: "TNSR".into(),
            found: String::from_utf8_lossy(magic).into_owned(),
        });
    }
    let version = r.u8()?;
    if version != TNSR_VERSION {
        return Err(Error::BadVersion(version));
    }
    let rank = r.u32()? as usize;
    if rank == 0 {
        return Err(Error::ZeroRank);
    }
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        shape.push(r.u64()? as usize);
    }
    let n = shape
        .iter()
        .try_fold(1usize, |acc, &e| acc.checked_mul(e))
        .ok_or_else(|| Error::InvalidArgument("tensor extents overflow".into()))?;
    let data = r.f64s(n)?;
    r.finish()?;
    Tensor::new(shape, data)
}

pub fn write_tensor(path: impl AsRef<Path>, t: &Tensor) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_tensor(t)?).map_err(|e| Error::io(path, e))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_tensor(&bytes)
}

/// Quantize a real intensity to a byte: `round(clamp(u, 0, 1) * 255)`, halves up.
pub fn quantize(u: f64) -> u8 {
    let v = if u.is_nan() { 0.0 } else { u.clamp(0.0, 1.0) };
    (v * 255.0 + 0.5).floor() as u8
}

pub fn encode_pnm(img: &Image) -> Vec<u8> {
    let (c, h, w) = (img.channels(), img.height(), img.width());
    let magic = if c == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{w} {h}\n255\n").into_bytes();
    let t = img.tensor();
    for i in 0..h {
        for j in 0..w {
            for ch in 0..c {
                out.push(quantize(t.get3(ch, i, j)));
            }
        }
    }
    out
}

fn pnm_token(bytes: &[u8], pos: &mut usize) -> Result<String> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::Truncated {
            needed: 1,
            available: 0,
        });
    }
    Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
}

pub fn decode_pnm(bytes: &[u8]) -> Result<Image> {
    let mut pos = 0;
    let magic = pnm_token(bytes, &mut pos)?;
    let channels = match magic.as_str() {
        "P5" => 1,
        "P6" => 3,
        other => return Err(Error::UnsupportedFormat(format!("PNM magic {other:?}"))),
    };
    let mut dim = |what: &str| -> Result<usize> {
        let tok = pnm_token(bytes, &mut pos)?;
        tok.parse::<usize>()
            .map_err(|_| Error::UnsupportedFormat(format!("bad PNM {what} {tok:?}")))
    };
    let width = dim("width")?;
    let height = dim("height")?;
    let maxval = dim("maxval")?;
    if maxval != 255 {
        return Err(Error::UnsupportedFormat(format!("PNM maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let needed = width * height * channels;
    let available = bytes.len().saturating_sub(pos);
    if available < needed {
        return Err(Error::Truncated { needed, available });
    }
    let raster = &bytes[pos..pos + needed];
    let mut t = Tensor::zeros(&[channels, height, width]);
    for i in 0..height {
        for j in 0..width {
            for ch in 0..channels {
                let off = t.offset3(ch, i, j);
                t.data_mut()[off] = raster[(i * width + j) * channels + ch] as f64 / 255.0;
            }
        }
    }
    Image::new(t)
}

pub fn write_pnm(path: impl AsRef<Path>, img: &Image) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pnm(img)).map_err(|e| Error::io(path, e))
}

pub fn read_pnm(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pnm(&bytes)
}

pub fn format_meta(meta: &BTreeMap<String, String>) -> String {
    meta.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

pub fn parse_meta(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::MalformedConfig {
            line: n + 1,
            text: line.into(),
        })?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// Write a dataset as `images.tnsr` (N, C, H, W) plus `meta.txt`.
pub fn write_dataset(dir: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut shape = vec![ds.len()];
    shape.extend_from_slice(ds.image_shape());
    let data: Vec<f64> = ds
        .items()
        .iter()
        .flat_map(|i| i.tensor().data().iter().copied())
        .collect();
    write_tensor(dir.join("images.tnsr"), &Tensor::new(shape, data)?)?;
    let meta = dir.join("meta.txt");
    fs::write(&meta, format_meta(&ds.metadata)).map_err(|e| Error::io(meta, e))
}

pub fn read_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let stack = read_tensor(dir.join("images.tnsr"))?;
    if stack.rank() != 4 {
        return Err(Error::InvalidArgument(format!(
            "dataset stack must be rank 4, got {:?}",
            stack.shape()
        )));
    }
    let s = stack.shape().to_vec();
    let per = s[1] * s[2] * s[3];
    let items = stack
        .data()
        .chunks(per.max(1))
        .take(s[0])
        .map(|chunk| Image::new(Tensor::new(s[1..].to_vec(), chunk.to_vec())?))
        .collect::<Result<Vec<_>>>()?;
    let mut ds = Dataset::new(items)?;
    let meta = dir.join("meta.txt");
    if meta.exists() {
        let text = fs::read_to_string(&meta).map_err(|e| Error::io(&meta, e))?;
        ds.metadata = parse_meta(&text)?;
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_crafted_rank_one() {
        let mut b = b"TNSR".to_vec();
        b.push(1);
        b.extend_from_slice(&1u32.to_le_bytes());
        b.extend_from_slice(&1u64.to_le_bytes());
        b.extend_from_slice(&1.5f64.to_le_bytes());
        let t = decode_tensor(&b).unwrap();
        assert_eq!(t.shape(), &[1]);
        assert_eq!(t.data(), &[1.5]);
    }

    #[test]
    fn tnsr_error_kinds() {
        let good = encode_tensor(&Tensor::filled(&[2, 3], 0.25)).unwrap();
        let mut bad = good.clone();
        bad[..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode_tensor(&bad), Err(Error::BadMagic { .. })));
        assert!(matches!(
            decode_tensor(&good[..good.len() - 3]),
            Err(Error::Truncated { .. })
        ));
        let mut zero = b"TNSR\x01".to_vec();
        zero.extend_from_slice(&0u32.to_le_bytes());
        assert!(matches!(decode_tensor(&zero), Err(Error::ZeroRank)));
        let scalar = Tensor::new(vec![], vec![1.0]).unwrap();
        assert!(matches!(encode_tensor(&scalar), Err(Error::ZeroRank)));
    }

    #[test]
    fn quantization_rule() {
        assert_eq!(quantize(1.0), 255);
        assert_eq!(quantize(0.5), 128);
        assert_eq!(quantize(-3.0), 0);
        assert_eq!(quantize(7.0), 255);
    }

    #[test]
    fn zero_p5() {
        let mut b = b"P5\n2 2\n255\n".to_vec();
        b.extend_from_slice(&[0, 0, 0, 0]);
        let img = decode_pnm(&b).unwrap();
        assert_eq!(img.channels(), 1);
        assert!(img.tensor().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pnm_rejects_other_formats() {
        assert!(matches!(
            decode_pnm(b"P2\n2 2\n255\n0 0 0 0"),
            Err(Error::UnsupportedFormat(_))
        ));
        assert!(matches!(
            decode_pnm(b"P5\n1 1\n65535\n\0\0"),
            Err(Error::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn pnm_header_comments() {
        let mut b = b"P6\n# made by hand\n1 1\n255\n".to_vec();
        b.extend_from_slice(&[255, 0, 51]);
        let img = decode_pnm(&b).unwrap();
        assert_eq!(img.tensor().data(), &[1.0, 0.0, 0.2]);
    }

    #[test]
    fn meta_round_trip() {
        let mut m = BTreeMap::new();
        m.insert("sigma".to_string(), "0.05".to_string());
        m.insert("op".to_string(), "gaussian_blur".to_string());
        assert_eq!(parse_meta(&format_meta(&m)).unwrap(), m);
    }
}
