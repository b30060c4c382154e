//! IDX file loading (the MNIST/Fashion-MNIST container format).
//!
//! Images use magic `0x00000803` (unsigned bytes, 3 dimensions) and labels
//! `0x00000801`; all integers are big-endian. Pixels are normalized to
//! `[0, 1]` by dividing by 255. Errors carry the byte offset at which the
//! file stopped making sense.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use teasq_core::data::{DatasetHandle, Split};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        bail!(
            "file truncated at byte {offset}: expected a 4-byte big-endian integer, \
             found {} bytes",
            bytes.len() - offset.min(bytes.len())
        );
    }
    Ok(u32::from_be_bytes(bytes[offset..end].try_into().unwrap()))
}

/// Parses an IDX image file into `(pixels ∈ [0,1], count, rows, cols)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(Vec<f32>, usize, usize, usize)> {
    let magic = be_u32(bytes, 0)?;
    if magic != IMAGES_MAGIC {
        bail!("bad magic 0x{magic:08x} at byte 0: expected image magic 0x{IMAGES_MAGIC:08x}");
    }
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let expected = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .context("image dimensions overflow")?;
    let body = &bytes[16..];
    if body.len() != expected {
        bail!(
            "pixel payload at byte 16 has {} bytes but the header \
             ({count} × {rows} × {cols}) requires {expected}",
            body.len()
        );
    }
    let pixels = body.iter().map(|&b| f32::from(b) / 255.0).collect();
    Ok((pixels, count, rows, cols))
}

/// Parses an IDX label file into raw class bytes.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0)?;
    if magic != LABELS_MAGIC {
        bail!("bad magic 0x{magic:08x} at byte 0: expected label magic 0x{LABELS_MAGIC:08x}");
    }
    let count = be_u32(bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() != count {
        bail!(
            "label payload at byte 8 has {} bytes but the header requires {count}",
            body.len()
        );
    }
    Ok(body.to_vec())
}

fn load_split(
    dir: &Path,
    images_name: &str,
    labels_name: &str,
    split: Split,
    num_classes: usize,
) -> Result<DatasetHandle> {
    let images_path = dir.join(images_name);
    let labels_path = dir.join(labels_name);
    let image_bytes = fs::read(&images_path)
        .with_context(|| format!("reading {}", images_path.display()))?;
    let label_bytes = fs::read(&labels_path)
        .with_context(|| format!("reading {}", labels_path.display()))?;
    let (features, count, rows, cols) = parse_idx_images(&image_bytes)
        .with_context(|| format!("parsing {}", images_path.display()))?;
    let raw_labels = parse_idx_labels(&label_bytes)
        .with_context(|| format!("parsing {}", labels_path.display()))?;
    if raw_labels.len() != count {
        bail!(
            "{} holds {count} images but {} holds {} labels",
            images_path.display(),
            labels_path.display(),
            raw_labels.len()
        );
    }
    let mut labels = Vec::with_capacity(raw_labels.len());
    for (i, &l) in raw_labels.iter().enumerate() {
        let l = l as usize;
        if l >= num_classes {
            bail!(
                "{}: label {l} of sample {i} is outside the {num_classes}-class range",
                labels_path.display()
            );
        }
        labels.push(l);
    }
    Ok(DatasetHandle {
        name: String::from("fashion-mnist"),
        features,
        labels,
        input_dim: rows * cols,
        num_classes,
        split,
    })
}

/// Loads the four standard Fashion-MNIST IDX files from `dir`.
///
/// Expected names: `train-images-idx3-ubyte`, `train-labels-idx1-ubyte`,
/// `t10k-images-idx3-ubyte`, `t10k-labels-idx1-ubyte` (uncompressed).
pub fn load_fashion_mnist(dir: &Path) -> Result<(DatasetHandle, DatasetHandle)> {
    let train = load_split(
        dir,
        "train-images-idx3-ubyte",
        "train-labels-idx1-ubyte",
        Split::Train,
        10,
    )?;
    let test = load_split(
        dir,
        "t10k-images-idx3-ubyte",
        "t10k-labels-idx1-ubyte",
        Split::Test,
        10,
    )?;
    Ok((train, test))
}

/// The dataset cache directory: `TEASQ_DATA_DIR`, a `--data-dir` flag, or
/// `./data` as the fallback.
pub fn data_dir(flag: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Ok(env) = std::env::var("TEASQ_DATA_DIR") {
        if !env.is_empty() {
            return PathBuf::from(env);
        }
    }
    PathBuf::from("data")
}
