use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// `0x00000803`: unsigned bytes, three dimensions.
pub const IDX_IMAGES_MAGIC: u32 = 2051;
/// `0x00000801`: unsigned bytes, one dimension.
pub const IDX_LABELS_MAGIC: u32 = 2049;

/// Images `(N, 1, rows, cols)` scaled to `[0, 1]` and their digit labels.
#[derive(Clone, Debug, PartialEq)]
pub struct MnistSet<T> {
    pub images: Tensor<T>,
    pub labels: Vec<usize>,
}

fn be_u32(bytes: &[u8], at: usize) -> Option<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

fn parse_header(bytes: &[u8], magic: u32, dims: usize, path: &Path) -> Result<Vec<usize>> {
    let format = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    let found = be_u32(bytes, 0).ok_or_else(|| format("file shorter than IDX magic".into()))?;
    if found != magic {
        return Err(format(format!(
            "expected magic {magic} (0x{magic:08x}), found {found} (0x{found:08x})"
        )));
    }
    let extents = (0..dims)
        .map(|d| be_u32(bytes, 4 + 4 * d).map(|v| v as usize))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| format("truncated IDX header".into()))?;
    let expected = 4 + 4 * dims + extents.iter().product::<usize>();
    if bytes.len() != expected {
        return Err(format(format!(
            "IDX payload has {} bytes, header implies {}",
            bytes.len(),
            expected
        )));
    }
    Ok(extents)
}

/// Decodes an IDX image file and an IDX label file already in memory.
pub fn parse_mnist_idx<T: Real>(
    images: &[u8],
    labels: &[u8],
    images_path: &Path,
    labels_path: &Path,
) -> Result<MnistSet<T>> {
    let dims = parse_header(images, IDX_IMAGES_MAGIC, 3, images_path)?;
    let (n, rows, cols) = (dims[0], dims[1], dims[2]);
    let label_dims = parse_header(labels, IDX_LABELS_MAGIC, 1, labels_path)?;
    if label_dims[0] != n {
        return Err(Error::Format {
            path: labels_path.to_path_buf(),
            reason: format!("{} labels for {n} images", label_dims[0]),
        });
    }
    if n == 0 || rows == 0 || cols == 0 {
        return Err(Error::Format {
            path: images_path.to_path_buf(),
            reason: "empty image set".into(),
        });
    }
    let labels: Vec<usize> = labels[8..].iter().map(|&b| b as usize).collect();
    if let Some(bad) = labels.iter().find(|&&l| l > 9) {
        return Err(Error::Format {
            path: labels_path.to_path_buf(),
            reason: format!("label {bad} outside 0..=9"),
        });
    }
    let pixels = images[16..].iter().map(|&p| T::of(p as f64 / 255.0)).collect();
    Ok(MnistSet {
        images: Tensor::new([n, 1, rows, cols], pixels)?,
        labels,
    })
}

pub fn load_mnist_idx<T: Real>(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<MnistSet<T>> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    let images = fs::read(ip).map_err(|e| Error::io(ip, e))?;
    let labels = fs::read(lp).map_err(|e| Error::io(lp, e))?;
    parse_mnist_idx(&images, &labels, ip, lp)
}

/// Serializes raw image bytes as an IDX3 file.
pub fn encode_idx_images(n: usize, rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    assert_eq!(pixels.len(), n * rows * cols);
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IDX_IMAGES_MAGIC, n as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> &Path {
        Path::new(s)
    }

    #[test]
    fn magic_constants() {
        assert_eq!(IDX_IMAGES_MAGIC, 0x0000_0803);
        assert_eq!(IDX_LABELS_MAGIC, 0x0000_0801);
    }

    #[test]
    fn zero_bytes_give_zero_tensor() {
        let img = encode_idx_images(2, 28, 28, &[0; 2 * 784]);
        let lab = encode_idx_labels(&[3, 7]);
        let set = parse_mnist_idx::<f32>(&img, &lab, p("i"), p("l")).unwrap();
        assert_eq!(set.images.shape(), &[2, 1, 28, 28]);
        assert!(set.images.data().iter().all(|&v| v == 0.0));
        assert_eq!(set.labels, vec![3, 7]);
    }

    #[test]
    fn wrong_magic_reports_found_value() {
        let mut img = encode_idx_images(1, 2, 2, &[0; 4]);
        img[3] = 0x01;
        let err = parse_mnist_idx::<f32>(&img, &encode_idx_labels(&[1]), p("i"), p("l")).unwrap_err();
        assert!(err.to_string().contains("found 2049"), "{err}");
    }

    #[test]
    fn count_mismatch_and_truncation() {
        let img = encode_idx_images(2, 2, 2, &[0; 8]);
        assert!(parse_mnist_idx::<f32>(&img, &encode_idx_labels(&[1]), p("i"), p("l")).is_err());
        assert!(parse_mnist_idx::<f32>(&img[..20], &encode_idx_labels(&[1, 2]), p("i"), p("l")).is_err());
        assert!(parse_mnist_idx::<f32>(&img, &encode_idx_labels(&[1, 12]), p("i"), p("l")).is_err());
    }

    #[test]
    fn pixels_scale_to_unit_interval() {
        let img = encode_idx_images(1, 1, 3, &[0, 51, 255]);
        let set = parse_mnist_idx::<f64>(&img, &encode_idx_labels(&[0]), p("i"), p("l")).unwrap();
        assert_eq!(set.images.data(), &[0.0, 0.2, 1.0]);
    }
}
