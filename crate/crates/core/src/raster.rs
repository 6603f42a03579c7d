//! Raster images and the geometric transforms applied during normalization.
//!
//! All transforms are pure: they borrow the input and return a new image.
//! Interpolation is bilinear throughout.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::geometry::Point2;

/// Slack allowed when a rotated sample lands a hair outside the image.
const EDGE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RasterError {
    #[error("image dimensions must be positive, got {width}x{height}")]
    ZeroDimension { width: usize, height: usize },
    #[error("expected {expected} pixel values, got {actual}")]
    PixelCountMismatch { expected: usize, actual: usize },
    #[error("rectangle must have finite position and positive finite size")]
    InvalidRect,
    #[error("crop rectangle lies entirely outside the image")]
    EmptyAfterClamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channels {
    Gray,
    Rgb,
}

impl Channels {
    pub const fn count(self) -> usize {
        match self {
            Channels::Gray => 1,
            Channels::Rgb => 3,
        }
    }
}

/// Row-major 8-bit image with interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: Channels,
    pixels: Vec<u8>,
}

impl RasterImage {
    pub fn new(
        width: usize,
        height: usize,
        channels: Channels,
        pixels: Vec<u8>,
    ) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::ZeroDimension { width, height });
        }
        let expected = width * height * channels.count();
        if pixels.len() != expected {
            return Err(RasterError::PixelCountMismatch {
                expected,
                actual: pixels.len(),
            });
        }
        Ok(RasterImage {
            width,
            height,
            channels,
            pixels,
        })
    }

    pub fn filled(
        width: usize,
        height: usize,
        channels: Channels,
        value: u8,
    ) -> Result<Self, RasterError> {
        Self::new(
            width,
            height,
            channels,
            vec![value; width * height * channels.count()],
        )
    }

    /// Builds a gray image from a function of `(x, y)`.
    pub fn gray_from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> u8,
    ) -> Result<Self, RasterError> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, Channels::Gray, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> Channels {
        self.channels
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    /// Intensity of channel `c` at column `x`, row `y`.
    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.pixels[self.index(x, y, c)]
    }

    fn index(&self, x: usize, y: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels.count() + c
    }

    /// Channel `c` as a row-major plane of reals.
    pub(crate) fn plane(&self, c: usize) -> Vec<f64> {
        let n = self.channels.count();
        self.pixels
            .iter()
            .skip(c)
            .step_by(n)
            .map(|&v| f64::from(v))
            .collect()
    }

    /// Luma conversion, `round(0.299 R + 0.587 G + 0.114 B)`.
    pub fn to_gray(&self) -> RasterImage {
        match self.channels {
            Channels::Gray => self.clone(),
            Channels::Rgb => {
                let pixels = self
                    .pixels
                    .chunks_exact(3)
                    .map(|rgb| {
                        let luma = 0.299 * f64::from(rgb[0])
                            + 0.587 * f64::from(rgb[1])
                            + 0.114 * f64::from(rgb[2]);
                        quantize(luma)
                    })
                    .collect();
                RasterImage {
                    width: self.width,
                    height: self.height,
                    channels: Channels::Gray,
                    pixels,
                }
            }
        }
    }

    /// Bilinear sample of channel `c`, or `None` when the location falls
    /// outside the pixel grid.
    fn sample(&self, sx: f64, sy: f64, c: usize) -> Option<f64> {
        let sx = snap_into(sx, (self.width - 1) as f64)?;
        let sy = snap_into(sy, (self.height - 1) as f64)?;
        let x0 = libm::floor(sx) as usize;
        let y0 = libm::floor(sy) as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = sx - x0 as f64;
        let fy = sy - y0 as f64;
        let p = |x, y| f64::from(self.get(x, y, c));
        let top = p(x0, y0) + fx * (p(x1, y0) - p(x0, y0));
        let bottom = p(x0, y1) + fx * (p(x1, y1) - p(x0, y1));
        Some(top + fy * (bottom - top))
    }
}

fn snap_into(v: f64, max: f64) -> Option<f64> {
    if !(v >= -EDGE_EPS && v <= max + EDGE_EPS) {
        return None;
    }
    Some(v.clamp(0.0, max))
}

fn quantize(v: f64) -> u8 {
    libm::round(v).clamp(0.0, 255.0) as u8
}

/// Axis-aligned rectangle in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelRect {
    left: f64,
    top: f64,
    width: f64,
    height: f64,
}

impl PixelRect {
    pub fn new(left: f64, top: f64, width: f64, height: f64) -> Result<Self, RasterError> {
        let ok = left.is_finite()
            && top.is_finite()
            && width.is_finite()
            && height.is_finite()
            && width > 0.0
            && height > 0.0;
        if !ok {
            return Err(RasterError::InvalidRect);
        }
        Ok(PixelRect {
            left,
            top,
            width,
            height,
        })
    }

    pub fn left(&self) -> f64 {
        self.left
    }

    pub fn top(&self) -> f64 {
        self.top
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn right(&self) -> f64 {
        self.left + self.width
    }

    pub fn bottom(&self) -> f64 {
        self.top + self.height
    }

    pub fn translated(&self, dx: f64, dy: f64) -> PixelRect {
        PixelRect {
            left: self.left + dx,
            top: self.top + dy,
            ..*self
        }
    }
}

/// Rotates the image content by `angle` radians about `center`.
///
/// Each output pixel is sampled from the inverse-rotated source location, so
/// a point `p` of the input ends up at `p.rotated_about(center, angle)`.
/// Samples that fall outside the input are 0.
pub fn rotate_about(image: &RasterImage, center: Point2, angle: f64) -> RasterImage {
    if angle == 0.0 {
        return image.clone();
    }
    let n = image.channels.count();
    let mut pixels = vec![0u8; image.pixels.len()];
    for y in 0..image.height {
        for x in 0..image.width {
            let src = Point2::new(x as f64, y as f64).rotated_about(&center, -angle);
            let base = (y * image.width + x) * n;
            for c in 0..n {
                if let Some(v) = image.sample(src.x, src.y, c) {
                    pixels[base + c] = quantize(v);
                }
            }
        }
    }
    RasterImage {
        pixels,
        ..image.clone()
    }
}

/// Copies the pixels covered by `rect` after clamping it to the image.
///
/// The rectangle covers columns `floor(left)..ceil(left + width)` and rows
/// `floor(top)..ceil(top + height)`.
pub fn crop(image: &RasterImage, rect: &PixelRect) -> Result<RasterImage, RasterError> {
    let clamp_x = |v: f64| v.clamp(0.0, image.width as f64) as usize;
    let clamp_y = |v: f64| v.clamp(0.0, image.height as f64) as usize;
    let x0 = clamp_x(libm::floor(rect.left));
    let x1 = clamp_x(libm::ceil(rect.right()));
    let y0 = clamp_y(libm::floor(rect.top));
    let y1 = clamp_y(libm::ceil(rect.bottom()));
    if x1 <= x0 || y1 <= y0 {
        return Err(RasterError::EmptyAfterClamp);
    }
    let n = image.channels.count();
    let mut pixels = Vec::with_capacity((x1 - x0) * (y1 - y0) * n);
    for y in y0..y1 {
        let start = image.index(x0, y, 0);
        let end = image.index(x1 - 1, y, n - 1) + 1;
        pixels.extend_from_slice(&image.pixels[start..end]);
    }
    Ok(RasterImage {
        width: x1 - x0,
        height: y1 - y0,
        channels: image.channels,
        pixels,
    })
}

/// Bilinear resampling to `out_width` x `out_height`.
pub fn resize(
    image: &RasterImage,
    out_width: usize,
    out_height: usize,
) -> Result<RasterImage, RasterError> {
    if out_width == 0 || out_height == 0 {
        return Err(RasterError::ZeroDimension {
            width: out_width,
            height: out_height,
        });
    }
    if out_width == image.width && out_height == image.height {
        return Ok(image.clone());
    }
    let n = image.channels.count();
    let mut pixels = vec![0u8; out_width * out_height * n];
    for c in 0..n {
        let plane = resample_plane(
            &image.plane(c),
            image.width,
            image.height,
            out_width,
            out_height,
        );
        for (i, v) in plane.into_iter().enumerate() {
            pixels[i * n + c] = quantize(v);
        }
    }
    Ok(RasterImage {
        width: out_width,
        height: out_height,
        channels: image.channels,
        pixels,
    })
}

/// Pixel-center aligned source coordinate for each output index, clamped
/// to the edge pixels.
fn source_taps(in_len: usize, out_len: usize) -> Vec<(usize, usize, f64)> {
    let scale = in_len as f64 / out_len as f64;
    let max = (in_len - 1) as f64;
    (0..out_len)
        .map(|i| {
            let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, max);
            let lo = libm::floor(s) as usize;
            let hi = (lo + 1).min(in_len - 1);
            (lo, hi, s - lo as f64)
        })
        .collect()
}

/// Bilinear resampling of a single real-valued plane, without quantization.
pub(crate) fn resample_plane(
    src: &[f64],
    width: usize,
    height: usize,
    out_width: usize,
    out_height: usize,
) -> Vec<f64> {
    let xs = source_taps(width, out_width);
    let ys = source_taps(height, out_height);
    let mut out = Vec::with_capacity(out_width * out_height);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let p = |x: usize, y: usize| src[y * width + x];
            let top = p(x0, y0) + fx * (p(x1, y0) - p(x0, y0));
            let bottom = p(x0, y1) + fx * (p(x1, y1) - p(x0, y1));
            out.push(top + fy * (bottom - top));
        }
    }
    out
}

/// Mirrors the image about its vertical axis.
pub fn flip_horizontal(image: &RasterImage) -> RasterImage {
    let n = image.channels.count();
    let row_len = image.width * n;
    let mut pixels = Vec::with_capacity(image.pixels.len());
    for row in image.pixels.chunks_exact(row_len) {
        for px in row.chunks_exact(n).rev() {
            pixels.extend_from_slice(px);
        }
    }
    RasterImage {
        pixels,
        ..image.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;
    use proptest::prelude::*;

    fn gray(w: usize, h: usize, px: &[u8]) -> RasterImage {
        RasterImage::new(w, h, Channels::Gray, px.to_vec()).unwrap()
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert_eq!(
            RasterImage::new(0, 2, Channels::Gray, vec![]),
            Err(RasterError::ZeroDimension {
                width: 0,
                height: 2
            })
        );
        assert_eq!(
            RasterImage::new(2, 2, Channels::Rgb, vec![0; 4]),
            Err(RasterError::PixelCountMismatch {
                expected: 12,
                actual: 4
            })
        );
    }

    #[test]
    fn gray_conversion_uses_rec601_weights() {
        let img = RasterImage::new(2, 1, Channels::Rgb, vec![255, 0, 0, 10, 200, 30]).unwrap();
        let g = img.to_gray();
        assert_eq!(g.channels(), Channels::Gray);
        // 0.299*255 = 76.245; 0.299*10 + 0.587*200 + 0.114*30 = 123.81
        assert_eq!(g.pixels(), &[76, 124]);
    }

    #[test]
    fn rotate_zero_is_identity() {
        let img = gray(3, 2, &[1, 2, 3, 4, 5, 6]);
        assert_eq!(rotate_about(&img, Point2::new(0.3, 0.7), 0.0), img);
    }

    #[test]
    fn rotate_half_turn_about_center_reverses_both_axes() {
        let img = gray(2, 2, &[10, 20, 30, 40]);
        let out = rotate_about(&img, Point2::new(0.5, 0.5), PI);
        assert_eq!(out.pixels(), &[40, 30, 20, 10]);

        let rgb = RasterImage::new(2, 2, Channels::Rgb, (0..12).collect()).unwrap();
        let out = rotate_about(&rgb, Point2::new(0.5, 0.5), PI);
        assert_eq!(out.pixels(), &[9, 10, 11, 6, 7, 8, 3, 4, 5, 0, 1, 2]);
    }

    #[test]
    fn rotate_uniform_image_keeps_interior_and_zeroes_far_corners() {
        let (w, h) = (21usize, 15usize);
        let img = RasterImage::filled(w, h, Channels::Gray, 180).unwrap();
        let center = Point2::new(10.0, 7.0);
        for &angle in &[0.3, -0.9, 2.2, PI / 4.0] {
            let out = rotate_about(&img, center, angle);
            assert_eq!((out.width(), out.height()), (w, h));
            for y in 0..h {
                for x in 0..w {
                    // Brute-force inverse mapping, independent of Point2.
                    let (dx, dy) = (x as f64 - center.x, y as f64 - center.y);
                    let sx = center.x + libm::cos(angle) * dx + libm::sin(angle) * dy;
                    let sy = center.y - libm::sin(angle) * dx + libm::cos(angle) * dy;
                    let inside = |v: f64, max: f64| v >= 1e-6 && v <= max - 1e-6;
                    let outside = |v: f64, max: f64| v < -1e-6 || v > max + 1e-6;
                    let v = out.get(x, y, 0);
                    if inside(sx, (w - 1) as f64) && inside(sy, (h - 1) as f64) {
                        assert_eq!(v, 180, "interior pixel ({x},{y}) at {angle}");
                    } else if outside(sx, (w - 1) as f64) || outside(sy, (h - 1) as f64) {
                        assert_eq!(v, 0, "outside pixel ({x},{y}) at {angle}");
                    }
                }
            }
            assert_eq!(out.get(0, 0, 0), 0, "corner must be filled at {angle}");
        }
    }

    #[test]
    fn crop_whole_image_is_identity() {
        let img = gray(3, 2, &[1, 2, 3, 4, 5, 6]);
        let rect = PixelRect::new(0.0, 0.0, 3.0, 2.0).unwrap();
        assert_eq!(crop(&img, &rect).unwrap(), img);
    }

    #[test]
    fn crop_single_pixel() {
        let img = gray(2, 1, &[7, 9]);
        let rect = PixelRect::new(1.0, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(crop(&img, &rect).unwrap().pixels(), &[9]);
    }

    #[test]
    fn crop_clamps_past_right_edge() {
        let img = RasterImage::gray_from_fn(8, 5, |x, y| (y * 8 + x) as u8).unwrap();
        let rect = PixelRect::new(3.0, 1.0, 15.0, 2.0).unwrap();
        let out = crop(&img, &rect).unwrap();
        assert_eq!((out.width(), out.height()), (5, 2));
        let mut expected = Vec::new();
        for y in 1..3 {
            for x in 3..8 {
                expected.push(img.pixels()[y * 8 + x]);
            }
        }
        assert_eq!(out.pixels(), expected.as_slice());
    }

    #[test]
    fn crop_outside_is_empty() {
        let img = gray(2, 2, &[0; 4]);
        let rect = PixelRect::new(5.0, 5.0, 2.0, 2.0).unwrap();
        assert_eq!(crop(&img, &rect), Err(RasterError::EmptyAfterClamp));
        let rect = PixelRect::new(-4.0, 0.0, 4.0, 1.0).unwrap();
        assert_eq!(crop(&img, &rect), Err(RasterError::EmptyAfterClamp));
    }

    #[test]
    fn rect_requires_positive_area() {
        assert_eq!(
            PixelRect::new(0.0, 0.0, 0.0, 1.0),
            Err(RasterError::InvalidRect)
        );
        assert_eq!(
            PixelRect::new(0.0, 0.0, 1.0, -1.0),
            Err(RasterError::InvalidRect)
        );
        assert_eq!(
            PixelRect::new(f64::NAN, 0.0, 1.0, 1.0),
            Err(RasterError::InvalidRect)
        );
    }

    #[test]
    fn resize_same_size_is_identity() {
        let img = gray(3, 2, &[1, 2, 3, 4, 5, 6]);
        assert_eq!(resize(&img, 3, 2).unwrap(), img);
    }

    #[test]
    fn resize_uniform_stays_uniform() {
        let img = RasterImage::filled(7, 3, Channels::Rgb, 77).unwrap();
        let out = resize(&img, 11, 2).unwrap();
        assert!(out.pixels().iter().all(|&v| v == 77));
    }

    #[test]
    fn upsample_two_pixels_to_four() {
        // Output centers map to source x = -0.25, 0.25, 0.75, 1.25, clamped to
        // [0, 1]: weights give 0, 63.75, 191.25, 255.
        let img = gray(2, 1, &[0, 255]);
        let out = resize(&img, 4, 1).unwrap();
        assert_eq!(out.pixels(), &[0, 64, 191, 255]);
        assert!(out.pixels().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn resize_rejects_zero() {
        let img = gray(1, 1, &[0]);
        assert!(resize(&img, 0, 3).is_err());
    }

    #[test]
    fn flip_examples() {
        assert_eq!(
            flip_horizontal(&gray(3, 1, &[1, 2, 3])).pixels(),
            &[3, 2, 1]
        );
        let col = gray(1, 3, &[1, 2, 3]);
        assert_eq!(flip_horizontal(&col), col);
        let rgb = RasterImage::new(2, 1, Channels::Rgb, vec![1, 2, 3, 4, 5, 6]).unwrap();
        assert_eq!(flip_horizontal(&rgb).pixels(), &[4, 5, 6, 1, 2, 3]);
    }

    fn arb_image() -> impl Strategy<Value = RasterImage> {
        (1usize..9, 1usize..9, prop::bool::ANY).prop_flat_map(|(w, h, rgb)| {
            let ch = if rgb { Channels::Rgb } else { Channels::Gray };
            prop::collection::vec(any::<u8>(), w * h * ch.count())
                .prop_map(move |px| RasterImage::new(w, h, ch, px).unwrap())
        })
    }

    proptest! {
        #[test]
        fn flip_is_an_involution_preserving_values(img in arb_image()) {
            let once = flip_horizontal(&img);
            let mut a = img.pixels().to_vec();
            let mut b = once.pixels().to_vec();
            a.sort_unstable();
            b.sort_unstable();
            prop_assert_eq!(a, b);
            prop_assert_eq!(flip_horizontal(&once), img);
        }

        #[test]
        fn crop_never_grows(img in arb_image(), l in -5.0f64..10.0, t in -5.0f64..10.0,
                            w in 0.1f64..12.0, h in 0.1f64..12.0) {
            let rect = PixelRect::new(l, t, w, h).unwrap();
            if let Ok(out) = crop(&img, &rect) {
                prop_assert!(out.width() <= img.width());
                prop_assert!(out.height() <= img.height());
            }
        }

        #[test]
        fn rotation_preserves_dimensions(img in arb_image(), angle in -7.0f64..7.0) {
            let out = rotate_about(&img, Point2::new(1.0, 2.0), angle);
            prop_assert_eq!((out.width(), out.height(), out.channels()),
                            (img.width(), img.height(), img.channels()));
        }
    }
}
