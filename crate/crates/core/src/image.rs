//! Dense raster images, attention maps, and pixel coordinate arithmetic.
//!
//! Every stage of the pipeline moves the same payload: an [`Image`] holding
//! `height x width x channels` values in `[0, 1]`, stored row-major with
//! interleaved channels so that per-pixel vectors are contiguous. Images are
//! immutable after construction and all operations here are pure, so they can
//! be shared freely across worker threads.

use crate::error::{Error, Result};

/// A pixel position, `(row, col)` with row 0 at the top.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PixelCoord {
    pub row: usize,
    pub col: usize,
}

impl PixelCoord {
    pub fn new(row: usize, col: usize) -> Self {
        PixelCoord { row, col }
    }

    /// Squared Euclidean distance between two pixel positions, in pixel units.
    pub fn dist2(&self, other: &PixelCoord) -> f64 {
        let dr = self.row as f64 - other.row as f64;
        let dc = self.col as f64 - other.col as f64;
        dr * dr + dc * dc
    }
}

/// Dense `height x width x channels` raster of real values in `[0, 1]`.
///
/// Layout is row-major with interleaved channels: the vector for pixel
/// `(r, c)` occupies `data[(r*width + c)*channels ..][..channels]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    /// Builds an image, validating shape and value range.
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        if channels == 0 || channels > 4 {
            return Err(Error::invalid(format!(
                "channel count must be in 1..=4, got {channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::DimensionMismatch(format!(
                "data length {} != {}x{}x{}",
                data.len(),
                height,
                width,
                channels
            )));
        }
        for (i, &v) in data.iter().enumerate() {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!(
                    "pixel value {v} at flat index {i} outside [0, 1]"
                )));
            }
        }
        Ok(Image {
            height,
            width,
            channels,
            data,
        })
    }

    /// An image with every channel of every pixel set to `value`.
    pub fn constant(height: usize, width: usize, channels: usize, value: f64) -> Result<Self> {
        Image::new(height, width, channels, vec![value; height * width * channels])
    }

    /// Builds an image without the range scan. The caller must guarantee the
    /// invariants; used internally after clamping.
    pub(crate) fn from_clamped(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width * channels);
        debug_assert!(data.iter().all(|v| (0.0..=1.0).contains(v)));
        Image {
            height,
            width,
            channels,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Flat index of the first channel of pixel `(row, col)`.
    pub fn pixel_index(&self, row: usize, col: usize) -> usize {
        (row * self.width + col) * self.channels
    }

    /// The channel vector of one pixel.
    pub fn pixel(&self, coord: PixelCoord) -> &[f64] {
        let i = self.pixel_index(coord.row, coord.col);
        &self.data[i..i + self.channels]
    }

    pub fn contains(&self, coord: PixelCoord) -> bool {
        coord.row < self.height && coord.col < self.width
    }

    /// True when every pixel of `other` matches this image bit for bit.
    pub fn bitwise_eq(&self, other: &Image) -> bool {
        self.height == other.height
            && self.width == other.width
            && self.channels == other.channels
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Per-pixel saliency field in `[0, 1]` guiding the adaptive filter weights.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl AttentionMap {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid("attention map dimensions must be positive"));
        }
        if data.len() != height * width {
            return Err(Error::DimensionMismatch(format!(
                "attention data length {} != {}x{}",
                data.len(),
                height,
                width
            )));
        }
        if data.iter().any(|v| !v.is_finite() || !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("attention values must lie in [0, 1]"));
        }
        Ok(AttentionMap {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn value(&self, coord: PixelCoord) -> f64 {
        self.data[coord.row * self.width + coord.col]
    }

    /// Checks that the map covers `img` exactly.
    pub fn matches(&self, img: &Image) -> Result<()> {
        if self.height != img.height() || self.width != img.width() {
            return Err(Error::DimensionMismatch(format!(
                "attention map {}x{} vs image {}x{}",
                self.height,
                self.width,
                img.height(),
                img.width()
            )));
        }
        Ok(())
    }
}

/// Clipped range of window rows or columns centered at `center` for an odd
/// window side: `[center - radius, center + radius]` intersected with
/// `[0, limit)`.
pub(crate) fn clipped_range(center: usize, radius: usize, limit: usize) -> (usize, usize) {
    let lo = center.saturating_sub(radius);
    let hi = (center + radius).min(limit - 1);
    (lo, hi)
}

/// All in-bounds pixels of the `side x side` square centered at `center`,
/// in deterministic row-major order. Windows at the border are truncated to
/// the image; no synthetic padding pixels are ever produced.
pub fn window(img: &Image, center: PixelCoord, side: usize) -> Result<Vec<(PixelCoord, Vec<f64>)>> {
    if side == 0 || side.is_multiple_of(2) {
        return Err(Error::invalid(format!("window side must be odd, got {side}")));
    }
    if !img.contains(center) {
        return Err(Error::invalid(format!(
            "window center ({}, {}) outside {}x{} image",
            center.row,
            center.col,
            img.height(),
            img.width()
        )));
    }
    let radius = side / 2;
    let (r0, r1) = clipped_range(center.row, radius, img.height());
    let (c0, c1) = clipped_range(center.col, radius, img.width());
    let mut out = Vec::with_capacity((r1 - r0 + 1) * (c1 - c0 + 1));
    for row in r0..=r1 {
        for col in c0..=c1 {
            let coord = PixelCoord::new(row, col);
            out.push((coord, img.pixel(coord).to_vec()));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes_and_values() {
        assert!(Image::new(0, 1, 1, vec![]).is_err());
        assert!(Image::new(1, 1, 5, vec![0.0; 5]).is_err());
        assert!(Image::new(1, 2, 1, vec![0.0]).is_err());
        assert!(Image::new(1, 1, 1, vec![1.5]).is_err());
        assert!(Image::new(1, 1, 1, vec![f64::NAN]).is_err());
        assert!(Image::new(1, 1, 1, vec![0.5]).is_ok());
    }

    #[test]
    fn interior_window_is_full() {
        let img = Image::constant(5, 5, 1, 0.5).unwrap();
        let w = window(&img, PixelCoord::new(2, 2), 3).unwrap();
        assert_eq!(w.len(), 9);
    }

    #[test]
    fn corner_window_is_truncated() {
        let img = Image::constant(5, 5, 1, 0.5).unwrap();
        let w = window(&img, PixelCoord::new(0, 0), 3).unwrap();
        assert_eq!(w.len(), 4);
        let coords: Vec<_> = w.iter().map(|(c, _)| (c.row, c.col)).collect();
        assert_eq!(coords, vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
    }

    #[test]
    fn side_one_window_is_the_center() {
        let mut data = vec![0.0; 9];
        data[4] = 0.7;
        let img = Image::new(3, 3, 1, data).unwrap();
        let w = window(&img, PixelCoord::new(1, 1), 1).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].0, PixelCoord::new(1, 1));
        assert_eq!(w[0].1, vec![0.7]);
    }

    #[test]
    fn even_side_is_rejected() {
        let img = Image::constant(3, 3, 1, 0.0).unwrap();
        assert!(window(&img, PixelCoord::new(1, 1), 2).is_err());
    }

    #[test]
    fn window_order_is_row_major() {
        let img = Image::constant(4, 4, 2, 0.25).unwrap();
        let w = window(&img, PixelCoord::new(1, 1), 3).unwrap();
        let coords: Vec<_> = w.iter().map(|(c, _)| (c.row, c.col)).collect();
        assert_eq!(
            coords,
            vec![
                (0, 0),
                (0, 1),
                (0, 2),
                (1, 0),
                (1, 1),
                (1, 2),
                (2, 0),
                (2, 1),
                (2, 2)
            ]
        );
    }
}
