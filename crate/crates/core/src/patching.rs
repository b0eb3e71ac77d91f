//! Square patch sampling and cropping.
//!
//! Two sampling modes exist. `Random` draws top-left offsets uniformly over
//! every position where the patch fits, so patches straddle the JPEG block
//! lattice arbitrarily. `GridAligned` only considers offsets that are
//! multiples of [`JPEG_BLOCK`], keeping each patch's block structure in
//! phase with a compression grid anchored at the image origin.
//!
//! Sampling is without replacement and the returned regions are sorted in
//! row-major order (by `y`, then `x`).

use rand::seq::index;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;
use crate::{ImageBuffer, DEFAULT_PATCH_SIZE, JPEG_BLOCK};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PatchError {
    #[error("image of {width}x{height} is smaller than the {size}x{size} patch")]
    ImageTooSmall { width: u32, height: u32, size: u32 },
    #[error("region at ({x}, {y}) of size {size} exceeds the {width}x{height} image")]
    OutOfBounds {
        x: u32,
        y: u32,
        size: u32,
        width: u32,
        height: u32,
    },
    #[error("sampling policy needs count >= 1 and size >= 1 (count {count}, size {size})")]
    InvalidPolicy { count: usize, size: u32 },
}

/// A square crop location. `aligned` is set on regions produced by
/// grid-aligned sampling; such regions always sit on the 8x8 lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PatchRegion {
    pub x: u32,
    pub y: u32,
    pub size: u32,
    pub aligned: bool,
}

impl PatchRegion {
    pub fn new(x: u32, y: u32, size: u32) -> Self {
        Self {
            x,
            y,
            size,
            aligned: false,
        }
    }

    /// Whether the top-left corner lies on the JPEG block lattice.
    pub fn on_grid(&self) -> bool {
        self.x % JPEG_BLOCK == 0 && self.y % JPEG_BLOCK == 0
    }

    pub fn fits(&self, width: u32, height: u32) -> bool {
        u64::from(self.x) + u64::from(self.size) <= u64::from(width)
            && u64::from(self.y) + u64::from(self.size) <= u64::from(height)
    }

    fn row_major_key(&self) -> (u32, u32) {
        (self.y, self.x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    Random,
    GridAligned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingPolicy {
    pub mode: SamplingMode,
    /// Target number of patches; fewer are returned when fewer distinct
    /// positions exist.
    pub count: usize,
    #[serde(default = "default_size")]
    pub size: u32,
    #[serde(default)]
    pub seed: u64,
}

fn default_size() -> u32 {
    DEFAULT_PATCH_SIZE
}

impl SamplingPolicy {
    pub fn new(mode: SamplingMode, count: usize, size: u32, seed: u64) -> Result<Self, PatchError> {
        let policy = Self {
            mode,
            count,
            size,
            seed,
        };
        policy.validate()?;
        Ok(policy)
    }

    /// 128x128 patches at random offsets.
    pub fn random(count: usize, seed: u64) -> Self {
        Self {
            mode: SamplingMode::Random,
            count,
            size: DEFAULT_PATCH_SIZE,
            seed,
        }
    }

    /// 128x128 patches on the JPEG block lattice.
    pub fn grid_aligned(count: usize, seed: u64) -> Self {
        Self {
            mode: SamplingMode::GridAligned,
            count,
            size: DEFAULT_PATCH_SIZE,
            seed,
        }
    }

    pub fn with_size(self, size: u32) -> Self {
        Self { size, ..self }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<(), PatchError> {
        if self.count == 0 || self.size == 0 {
            return Err(PatchError::InvalidPolicy {
                count: self.count,
                size: self.size,
            });
        }
        Ok(())
    }
}

fn check_fits(width: u32, height: u32, size: u32) -> Result<(), PatchError> {
    if width < size || height < size {
        return Err(PatchError::ImageTooSmall {
            width,
            height,
            size,
        });
    }
    Ok(())
}

/// Every grid-aligned position where a `size` patch fits, row-major.
pub fn enumerate_aligned_positions(
    image: &ImageBuffer,
    size: u32,
) -> Result<Vec<PatchRegion>, PatchError> {
    aligned_positions(image.width(), image.height(), size)
}

/// Same as [`enumerate_aligned_positions`], from dimensions alone.
pub fn aligned_positions(width: u32, height: u32, size: u32) -> Result<Vec<PatchRegion>, PatchError> {
    if size == 0 {
        return Err(PatchError::InvalidPolicy { count: 1, size });
    }
    check_fits(width, height, size)?;
    let step = JPEG_BLOCK as usize;
    let xs = (0..=width - size).step_by(step);
    Ok((0..=height - size)
        .step_by(step)
        .flat_map(|y| {
            xs.clone().map(move |x| PatchRegion {
                x,
                y,
                size,
                aligned: true,
            })
        })
        .collect())
}

/// Samples `min(count, available)` distinct regions under `policy`.
pub fn sample_patches(
    image: &ImageBuffer,
    policy: &SamplingPolicy,
) -> Result<Vec<PatchRegion>, PatchError> {
    sample_regions(image.width(), image.height(), policy)
}

/// Same as [`sample_patches`], from dimensions alone.
pub fn sample_regions(
    width: u32,
    height: u32,
    policy: &SamplingPolicy,
) -> Result<Vec<PatchRegion>, PatchError> {
    policy.validate()?;
    let size = policy.size;
    check_fits(width, height, size)?;
    let mut rng = seed::stream_from(policy.seed);

    let mut regions = match policy.mode {
        SamplingMode::GridAligned => {
            let grid = aligned_positions(width, height, size)?;
            let amount = policy.count.min(grid.len());
            index::sample(&mut rng, grid.len(), amount)
                .into_iter()
                .map(|i| grid[i])
                .collect::<Vec<_>>()
        }
        SamplingMode::Random => {
            let span_x = (width - size) as usize + 1;
            let span_y = (height - size) as usize + 1;
            let total = span_x * span_y;
            let amount = policy.count.min(total);
            index::sample(&mut rng, total, amount)
                .into_iter()
                .map(|i| PatchRegion::new((i % span_x) as u32, (i / span_x) as u32, size))
                .collect()
        }
    };
    regions.sort_unstable_by_key(PatchRegion::row_major_key);
    Ok(regions)
}

/// Copies the pixels under `region` into a new buffer.
pub fn crop(image: &ImageBuffer, region: &PatchRegion) -> Result<ImageBuffer, PatchError> {
    if region.size == 0 || !region.fits(image.width(), image.height()) {
        return Err(PatchError::OutOfBounds {
            x: region.x,
            y: region.y,
            size: region.size,
            width: image.width(),
            height: image.height(),
        });
    }
    let channels = ImageBuffer::CHANNELS;
    let start = region.x as usize * channels;
    let len = region.size as usize * channels;
    let mut data = Vec::with_capacity(len * region.size as usize);
    for y in region.y..region.y + region.size {
        data.extend_from_slice(&image.row(y)[start..start + len]);
    }
    Ok(ImageBuffer::new(region.size, region.size, data).expect("crop preserves layout"))
}

/// Samples and crops in one step.
pub fn extract_patches(
    image: &ImageBuffer,
    policy: &SamplingPolicy,
) -> Result<(Vec<PatchRegion>, Vec<ImageBuffer>), PatchError> {
    let regions = sample_patches(image, policy)?;
    let patches = regions
        .iter()
        .map(|r| crop(image, r))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((regions, patches))
}
