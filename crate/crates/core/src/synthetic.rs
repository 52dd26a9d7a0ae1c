//! Piecewise-constant test images.

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::tensor::{Dataset, Image, Tensor};

/// Stream id of the blob generator for image `i`.
const BLOB_STREAM_BASE: u64 = 0xb10b_0000;

/// `n` images of 2 to 5 axis-aligned rectangles with intensities in
/// `[0.2, 1]` on a zero background; later rectangles paint over earlier ones.
pub fn blob_dataset(n: usize, channels: usize, height: usize, width: usize, seed: u64) -> Result<Dataset> {
    if n == 0 || height < 2 || width < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least one image of size 2x2 or more (n={n}, {height}x{width})"
        )));
    }
    let items = (0..n)
        .map(|i| {
            let mut rng = RngStream::new(seed, BLOB_STREAM_BASE + i as u64);
            blob_image(&mut rng, channels, height, width)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut ds = Dataset::new(items)?;
    ds.metadata.insert("source".into(), "blobs".into());
    ds.metadata.insert("seed".into(), seed.to_string());
    Ok(ds)
}

pub fn blob_image(rng: &mut RngStream, channels: usize, height: usize, width: usize) -> Result<Image> {
    let mut t = Tensor::zeros(&[channels, height, width]);
    let count = 2 + rng.below(4);
    for _ in 0..count {
        let (i0, i1) = span(rng, height);
        let (j0, j1) = span(rng, width);
        let level: Vec<f64> = (0..channels).map(|_| 0.2 + 0.8 * rng.uniform()).collect();
        for (c, &v) in level.iter().enumerate() {
            for i in i0..i1 {
                let row = (c * height + i) * width;
                t.data_mut()[row + j0..row + j1].fill(v);
            }
        }
    }
    Image::new(t)
}

/// Random half-open interval of length between 2 and `n`.
fn span(rng: &mut RngStream, n: usize) -> (usize, usize) {
    let len = 2 + rng.below(n - 1);
    let start = rng.below(n - len + 1);
    (start, start + len)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blobs_are_piecewise_constant_and_in_range() {
        let ds = blob_dataset(20, 1, 16, 16, 3).unwrap();
        for img in ds.items() {
            let d = img.tensor().data();
            assert!(d.iter().all(|&v| v == 0.0 || (0.2..=1.0).contains(&v)));
            assert!(d.iter().any(|&v| v > 0.0));
            let mut levels: Vec<f64> = d.to_vec();
            levels.sort_by(f64::total_cmp);
            levels.dedup();
            assert!(levels.len() <= 6);
        }
    }

    #[test]
    fn seeded_generation_is_reproducible() {
        let a = blob_dataset(4, 3, 8, 9, 11).unwrap();
        let b = blob_dataset(4, 3, 8, 9, 11).unwrap();
        assert_eq!(a.tensors(), b.tensors());
        let c = blob_dataset(4, 3, 8, 9, 12).unwrap();
        assert_ne!(a.tensors(), c.tensors());
    }
}
