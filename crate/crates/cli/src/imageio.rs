//! Image decoding. The core library only ever sees RGB buffers.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use image::DynamicImage;
use synthdetect::ImageBuffer;

const EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

pub fn is_image_path(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| EXTENSIONS.iter().any(|x| e.eq_ignore_ascii_case(x)))
}

/// Decodes a PNG or JPEG file, converting grayscale, alpha and 16-bit
/// inputs to 8-bit RGB.
pub fn load_rgb(path: &Path) -> anyhow::Result<ImageBuffer> {
    let decoded = image::ImageReader::open(path)
        .with_context(|| format!("opening {}", path.display()))?
        .with_guessed_format()?
        .decode()
        .with_context(|| format!("decoding {}", path.display()))?;
    let rgb = match decoded {
        DynamicImage::ImageRgb8(rgb) => rgb,
        other => {
            log::info!("{}: converting {:?} to RGB", path.display(), other.color());
            other.to_rgb8()
        }
    };
    Ok(ImageBuffer::try_from(rgb)?)
}

/// Expands directories (one level, image extensions only) and returns the
/// sorted, de-duplicated list of image paths.
pub fn collect_inputs(inputs: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for input in inputs {
        if input.is_dir() {
            for entry in std::fs::read_dir(input)
                .with_context(|| format!("listing {}", input.display()))?
            {
                let path = entry?.path();
                if path.is_file() && is_image_path(&path) {
                    out.push(path);
                }
            }
        } else if input.exists() {
            out.push(input.clone());
        } else {
            bail!("input {} does not exist", input.display());
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

pub fn save_png(image: &ImageBuffer, path: &Path) -> anyhow::Result<()> {
    let rgb: image::RgbImage = image.clone().into();
    rgb.save_with_format(path, image::ImageFormat::Png)
        .with_context(|| format!("writing {}", path.display()))
}
